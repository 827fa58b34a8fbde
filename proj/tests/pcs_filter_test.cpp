// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>

#include "catsynth/content_store.hpp"
#include "catsynth/digest.hpp"
#include "catsynth/error.hpp"
#include "catsynth/mock_backends.hpp"
#include "catsynth/pcs_filter.hpp"
#include "generators.hpp"
#include "scripted.hpp"

namespace catsynth {
namespace {

using testing::concept_fixture;
using testing::random_image;

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::Io;
}

std::vector<std::array<std::uint8_t, 3>> sorted_pixels(const Image& img) {
    std::vector<std::array<std::uint8_t, 3>> px;
    for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
        px.push_back({img.rgb[i], img.rgb[i + 1], img.rgb[i + 2]});
    }
    std::sort(px.begin(), px.end());
    return px;
}

bool same_patch(const Image& a, const Image& b, int px, int py, int p) {
    for (int y = py; y < py + p; ++y) {
        for (int x = px; x < px + p; ++x) {
            if (!std::equal(a.at(x, y), a.at(x, y) + 3, b.at(x, y))) {
                return false;
            }
        }
    }
    return true;
}

class Fixture : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = testing::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
        store_ = std::make_shared<ContentStore>(dir_);
        encoder_ = std::make_shared<PixelFlattenEncoder>(store_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    std::filesystem::path dir_;
    std::shared_ptr<ContentStore> store_;
    std::shared_ptr<PixelFlattenEncoder> encoder_;
};

TEST(PatchShuffle, PreservesPixelMultisetOfPaddedImage) {
    Rng rng(1);
    for (int i = 0; i < 60; ++i) {
        const int w = 20 + static_cast<int>(rng.below(100));
        const int h = 20 + static_cast<int>(rng.below(100));
        const auto img = random_image(rng, w, h);
        PerturbConfig cfg;
        cfg.seed = rng.next();
        cfg.shuffle_fraction = rng.uniform();
        const auto out = patch_shuffle(img, cfg);
        const auto padded = pad_to_multiple(img, 14);
        EXPECT_EQ(out.width, padded.width);
        EXPECT_EQ(out.height % 14, 0);
        EXPECT_EQ(sorted_pixels(out), sorted_pixels(padded));
    }
}

TEST(PatchShuffle, EveryChosenPatchMoves) {
    Rng rng(2);
    for (int i = 0; i < 40; ++i) {
        // random noise makes every patch distinct, so a moved patch always differs
        const auto img = random_image(rng, 14 * (2 + static_cast<int>(rng.below(8))), 14 * (2 + static_cast<int>(rng.below(8))));
        PerturbConfig cfg;
        cfg.seed = rng.next();
        cfg.shuffle_fraction = rng.uniform();
        const auto out = patch_shuffle(img, cfg);
        const std::size_t total = static_cast<std::size_t>(img.width / 14) * (img.height / 14);
        const auto chosen = static_cast<std::size_t>(std::ceil(cfg.shuffle_fraction * static_cast<double>(total)));
        std::size_t changed = 0;
        for (int y = 0; y < img.height; y += 14) {
            for (int x = 0; x < img.width; x += 14) {
                changed += same_patch(img, out, x, y, 14) ? 0 : 1;
            }
        }
        EXPECT_EQ(changed, chosen >= 2 ? chosen : 0);
    }
}

TEST(PatchShuffle, ZeroFractionAndDeterminism) {
    Rng rng(3);
    const auto img = random_image(rng, 56, 42);
    PerturbConfig cfg;
    cfg.shuffle_fraction = 0.0;
    EXPECT_EQ(patch_shuffle(img, cfg), img);
    cfg.shuffle_fraction = 0.5;
    cfg.seed = 99;
    EXPECT_EQ(patch_shuffle(img, cfg), patch_shuffle(img, cfg));
    auto other = cfg;
    other.seed = 100;
    EXPECT_NE(patch_shuffle(img, cfg), patch_shuffle(img, other));
}

TEST(PatchShuffle, ConfigValidation) {
    const Image img(28, 28);
    PerturbConfig cfg;
    cfg.shuffle_fraction = 1.5;
    EXPECT_EQ(code_of([&] { patch_shuffle(img, cfg); }), ErrorCode::BadFraction);
    cfg.shuffle_fraction = std::nan("");
    EXPECT_EQ(code_of([&] { patch_shuffle(img, cfg); }), ErrorCode::BadFraction);
    cfg.shuffle_fraction = 0.5;
    cfg.patch_size = 0;
    EXPECT_EQ(code_of([&] { patch_shuffle(img, cfg); }), ErrorCode::Precondition);
}

TEST(PatchShuffle, MixTakesReferencePatchesInPlace) {
    Rng rng(4);
    const auto img = random_image(rng, 70, 56);
    const auto ref = random_image(rng, 70, 56);
    PerturbConfig cfg;
    cfg.mode = PerturbMode::MixWithReference;
    cfg.seed = 5;
    cfg.shuffle_fraction = 0.4;
    const auto out = patch_shuffle(img, cfg, &ref);
    std::size_t from_ref = 0;
    for (int y = 0; y < 56; y += 14) {
        for (int x = 0; x < 70; x += 14) {
            const bool kept = same_patch(img, out, x, y, 14);
            const bool mixed = same_patch(ref, out, x, y, 14);
            EXPECT_TRUE(kept != mixed);
            from_ref += mixed ? 1 : 0;
        }
    }
    EXPECT_EQ(from_ref, 8u);
    EXPECT_EQ(code_of([&] { patch_shuffle(img, cfg); }), ErrorCode::GridMismatch);
    const auto small = random_image(rng, 28, 28);
    EXPECT_EQ(code_of([&] { patch_shuffle(img, cfg, &small); }), ErrorCode::GridMismatch);
}

TEST(Cosine, ValuesAndErrors) {
    const std::vector<double> a{1, 0}, b{0, 1}, c{2, 0}, z{0, 0}, three{1, 2, 3};
    EXPECT_DOUBLE_EQ(cosine(a, b), 0.0);
    EXPECT_DOUBLE_EQ(cosine(a, c), 1.0);
    EXPECT_EQ(code_of([&] { cosine(a, z); }), ErrorCode::ZeroVector);
    EXPECT_EQ(code_of([&] { cosine(a, three); }), ErrorCode::DimMismatch);
    const std::vector<double> big{1e200, 1e200};
    EXPECT_LE(cosine(big, big), 1.0);
}

TEST(Thresholds, Defaults) {
    EXPECT_EQ(default_threshold(SampleRole::Positive), 0.3);
    EXPECT_EQ(default_threshold(SampleRole::HardNegative), 0.1);
    EXPECT_EQ(code_of([] { default_threshold(SampleRole::EasyNegative); }), ErrorCode::Precondition);
}

TEST(FilterPcs, StrictThresholdAndStableOrder) {
    std::vector<PCSRecord> recs(4);
    const double values[] = {0.3, 0.31, 0.1, 0.5};
    for (int i = 0; i < 4; ++i) {
        recs[i].sample.address = std::to_string(i);
        recs[i].pcs = values[i];
    }
    const auto [kept, dropped] = filter_pcs(recs, SampleRole::Positive);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].sample.address, "1");
    EXPECT_EQ(kept[1].sample.address, "3");
    EXPECT_EQ(dropped[0].sample.address, "0");
    EXPECT_TRUE(std::all_of(kept.begin(), kept.end(), [](const auto& r) { return r.kept && r.threshold == 0.3; }));
    EXPECT_EQ(filter_pcs(recs, SampleRole::HardNegative).first.size(), 3u);
    EXPECT_EQ(filter_pcs(recs, SampleRole::Positive, 0.0).first.size(), 4u);
}

TEST(FilterPcs, KeptSetShrinksAsThresholdRises) {
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        const auto recs = testing::random_records(rng, 1 + rng.below(40));
        double t1 = rng.uniform() * 2 - 1, t2 = rng.uniform() * 2 - 1;
        if (t1 > t2) {
            std::swap(t1, t2);
        }
        const auto k1 = filter_pcs(recs, SampleRole::Positive, t1).first;
        const auto k2 = filter_pcs(recs, SampleRole::Positive, t2).first;
        for (const auto& r : k2) {
            EXPECT_TRUE(std::any_of(k1.begin(), k1.end(), [&](const auto& x) { return x.sample == r.sample; }));
        }
    }
}

TEST_F(Fixture, UniformImageAgainstItselfScoresZero) {
    Image flat(224, 224);
    std::fill(flat.rgb.begin(), flat.rgb.end(), 200);
    const auto ref = store_->put(flat);
    const std::vector<ImageRef> refs{ref};
    const auto r = pcs_score(ref, refs, *encoder_, PerturbConfig{}, *store_, 0.3);
    EXPECT_NEAR(r.pcs, 0.0, 1e-9);
    EXPECT_NEAR(r.s_original, 1.0, 1e-9);
    EXPECT_FALSE(r.kept);
}

TEST_F(Fixture, ForegroundMatchScoresAboveBackgroundMatch) {
    const auto reference = store_->put(concept_fixture(1, 2));
    const auto fg_match = store_->put(concept_fixture(1, 3));
    const auto bg_match = store_->put(concept_fixture(4, 2));
    const std::vector<ImageRef> refs{reference};
    const auto a = pcs_score(fg_match, refs, *encoder_, PerturbConfig{}, *store_, 0.3);
    const auto b = pcs_score(bg_match, refs, *encoder_, PerturbConfig{}, *store_, 0.3);
    EXPECT_GT(a.pcs, b.pcs);
    EXPECT_TRUE(a.kept);
    EXPECT_FALSE(b.kept);
}

// Fixture patches are flat and line up with the encoder's 16x16 boxes, so the
// feature of each box is just the patch value read at its corner.
std::vector<double> patch_features(const Image& img) {
    std::vector<double> f;
    for (int y = 0; y < img.height; y += 14) {
        for (int x = 0; x < img.width; x += 14) {
            f.push_back(img.at(x, y)[0] / 127.5 - 1.0);
        }
    }
    return f;
}

double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
    }
    return static_cast<double>(dot / std::sqrt(na * nb));
}

TEST_F(Fixture, ScoreMatchesBruteForceOracle) {
    Rng rng(11);
    for (int i = 0; i < 12; ++i) {
        const auto ref_img = concept_fixture(rng.next(), rng.next());
        const auto img = concept_fixture(rng.next(), rng.next());
        const auto sample = store_->put(img);
        const std::vector<ImageRef> refs{store_->put(ref_img)};
        PerturbConfig cfg;
        cfg.seed = rng.next();
        cfg.shuffle_fraction = 0.25 + 0.5 * rng.uniform();
        auto local = cfg;
        local.seed = cfg.seed ^ digest64(sample.address);
        const auto disturbed = patch_shuffle(img, local);
        const auto fr = patch_features(ref_img);
        const double so = naive_cosine(patch_features(img), fr);
        const double sd = naive_cosine(patch_features(disturbed), fr);
        const auto r = pcs_score(sample, refs, *encoder_, cfg, *store_, 0.3);
        EXPECT_NEAR(r.s_original, so, 1e-9);
        EXPECT_NEAR(r.s_disturbed, sd, 1e-9);
        EXPECT_NEAR(r.pcs, so - sd, 1e-9);
        EXPECT_EQ(r.kept, r.pcs > 0.3);
    }
}

TEST_F(Fixture, ZeroFractionGivesExactlyZero) {
    const auto sample = store_->put(concept_fixture(1, 3));
    const std::vector<ImageRef> refs{store_->put(concept_fixture(1, 2))};
    PerturbConfig cfg;
    cfg.shuffle_fraction = 0.0;
    EXPECT_EQ(pcs_score(sample, refs, *encoder_, cfg, *store_, 0.1).pcs, 0.0);
}

TEST_F(Fixture, MeanOverReferencesAndMixMode) {
    const auto sample = store_->put(concept_fixture(1, 3));
    // a reference of a different size is resized onto the sample grid in mix mode
    const std::vector<ImageRef> refs{store_->put(concept_fixture(1, 2)), store_->put(concept_fixture(1, 5, 112, 14))};
    PerturbConfig cfg;
    cfg.mode = PerturbMode::MixWithReference;
    const auto r = pcs_score(sample, refs, *encoder_, cfg, *store_, 0.1);
    ASSERT_EQ(r.per_reference.size(), 2u);
    EXPECT_DOUBLE_EQ(r.s_original, (r.per_reference[0].s_original + r.per_reference[1].s_original) / 2);
    EXPECT_DOUBLE_EQ(r.pcs, r.s_original - r.s_disturbed);
    EXPECT_EQ(code_of([&] { pcs_score(sample, {}, *encoder_, cfg, *store_, 0.1); }), ErrorCode::Precondition);
}

TEST_F(Fixture, BatchIsIndependentOfThreadCount) {
    std::vector<ImageRef> samples;
    for (std::uint64_t i = 0; i < 6; ++i) {
        samples.push_back(store_->put(concept_fixture(1 + i % 2, 10 + i)));
    }
    const std::vector<ImageRef> refs{store_->put(concept_fixture(1, 2))};
    const auto one = pcs_score_batch(samples, refs, *encoder_, PerturbConfig{}, *store_, 0.3, 1);
    const auto four = pcs_score_batch(samples, refs, *encoder_, PerturbConfig{}, *store_, 0.3, 4);
    ASSERT_EQ(one.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(one[i].sample, samples[i]);
        EXPECT_EQ(one[i].pcs, four[i].pcs);
    }
}

TEST_F(Fixture, EasyNegativeTextFilterUsesInclusiveThreshold) {
    const auto img = store_->put(concept_fixture(1, 2));
    std::vector<double> v = pixel_flatten(store_->load(img));
    encoder_->set_text_vector("same", v);
    std::vector<double> orth(v.size(), 0.0);
    // orthogonal to v: swap two coordinates with a sign flip
    std::size_t i = 0, j = 1;
    while (v[i] == 0.0) {
        ++i;
    }
    j = i + 1;
    while (v[j] == 0.0) {
        ++j;
    }
    orth[i] = v[j];
    orth[j] = -v[i];
    encoder_->set_text_vector("other", orth);
    const std::vector<PromptedSample> samples{{img, "same"}, {img, "other"}};
    const auto [kept, dropped] = filter_easy_negative(samples, *encoder_);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].prompt, "same");
    EXPECT_NEAR(kept[0].similarity, 1.0, 1e-12);
    EXPECT_NEAR(dropped[0].similarity, 0.0, 1e-12);
    const auto all = filter_easy_negative(samples, *encoder_, 0.0);
    EXPECT_EQ(all.first.size(), 2u);
}

} // namespace
} // namespace catsynth
