// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/pcs_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catsynth/digest.hpp"
#include "catsynth/parallel.hpp"
#include "catsynth/random.hpp"

namespace catsynth {

std::string_view to_string(PerturbMode mode) noexcept {
    return mode == PerturbMode::ShuffleSelf ? "shuffle_self" : "mix_with_reference";
}

std::optional<PerturbMode> perturb_mode_from_string(std::string_view s) noexcept {
    if (s == "shuffle_self") {
        return PerturbMode::ShuffleSelf;
    }
    if (s == "mix_with_reference") {
        return PerturbMode::MixWithReference;
    }
    return std::nullopt;
}

void PerturbConfig::validate() const {
    require(patch_size >= 1, "patch size must be >= 1");
    if (!(shuffle_fraction >= 0.0 && shuffle_fraction <= 1.0)) {
        fail(ErrorCode::BadFraction, "shuffle fraction must lie in [0, 1], got " + std::to_string(shuffle_fraction));
    }
}

double default_threshold(SampleRole role) {
    switch (role) {
    case SampleRole::Positive: return kPositiveThreshold;
    case SampleRole::HardNegative: return kHardNegativeThreshold;
    case SampleRole::EasyNegative: break;
    }
    fail(ErrorCode::Precondition, "easy negatives are filtered by text-image similarity, not PCS");
}

namespace {

void copy_patch(const Image& from, int fx, int fy, Image& to, int tx, int ty, int patch) {
    for (int y = 0; y < patch; ++y) {
        std::copy_n(from.at(fx, fy + y), 3 * patch, to.at(tx, ty + y));
    }
}

} // namespace

Image patch_shuffle(const Image& image, const PerturbConfig& config, const Image* reference) {
    config.validate();
    const Image padded = pad_to_multiple(image, config.patch_size);
    const int p = config.patch_size;
    const int cols = padded.width / p;
    const int rows = padded.height / p;
    const auto total = static_cast<std::size_t>(cols) * rows;

    Image padded_ref;
    if (config.mode == PerturbMode::MixWithReference) {
        if (reference == nullptr) {
            fail(ErrorCode::GridMismatch, "mix_with_reference needs a reference image");
        }
        padded_ref = pad_to_multiple(*reference, p);
        if (padded_ref.width != padded.width || padded_ref.height != padded.height) {
            fail(ErrorCode::GridMismatch, "reference grid " + std::to_string(padded_ref.width / p) + "x" +
                                              std::to_string(padded_ref.height / p) + " does not match " +
                                              std::to_string(cols) + "x" + std::to_string(rows));
        }
    }

    const auto chosen_count = static_cast<std::size_t>(std::ceil(config.shuffle_fraction * static_cast<double>(total)));
    if (chosen_count == 0) {
        return padded;
    }
    std::vector<std::size_t> positions(total);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    Rng rng(config.seed);
    // partial Fisher-Yates: the first chosen_count entries are a uniform
    // random ordered selection
    for (std::size_t i = 0; i < chosen_count; ++i) {
        std::swap(positions[i], positions[i + rng.below(total - i)]);
    }

    Image out = padded;
    auto origin = [&](std::size_t pos) {
        return std::pair{static_cast<int>(pos % static_cast<std::size_t>(cols)) * p,
                         static_cast<int>(pos / static_cast<std::size_t>(cols)) * p};
    };
    for (std::size_t i = 0; i < chosen_count; ++i) {
        const auto [tx, ty] = origin(positions[i]);
        if (config.mode == PerturbMode::ShuffleSelf) {
            const auto [fx, fy] = origin(positions[(i + 1) % chosen_count]);
            copy_patch(padded, fx, fy, out, tx, ty, p);
        } else {
            copy_patch(padded_ref, tx, ty, out, tx, ty, p);
        }
    }
    return out;
}

ImageRef patch_shuffle(const ImageRef& image, const PerturbConfig& config, ContentStore& store,
                       const ImageRef* reference) {
    const Image img = store.load(image);
    if (reference == nullptr) {
        return store.put(patch_shuffle(img, config, nullptr));
    }
    const Image ref = store.load(*reference);
    return store.put(patch_shuffle(img, config, &ref));
}

Image resize_nearest(const Image& image, int width, int height) {
    require(width > 0 && height > 0, "resize target must be positive");
    if (image.width == width && image.height == height) {
        return image;
    }
    Image out(width, height);
    for (int y = 0; y < height; ++y) {
        const int sy = static_cast<int>(static_cast<long long>(y) * image.height / height);
        for (int x = 0; x < width; ++x) {
            const int sx = static_cast<int>(static_cast<long long>(x) * image.width / width);
            std::copy_n(image.at(sx, sy), 3, out.at(x, y));
        }
    }
    return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        fail(ErrorCode::DimMismatch,
             "cannot compare vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    // Scale by the largest magnitude first so huge components cannot overflow.
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma = std::max(ma, std::abs(a[i]));
        mb = std::max(mb, std::abs(b[i]));
    }
    if (!(ma > 0.0) || !(mb > 0.0)) {
        fail(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
    }
    const double ia = 1.0 / ma, ib = 1.0 / mb;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i] * ia, y = b[i] * ib;
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na * ma < kZeroNormEpsilon || nb * mb < kZeroNormEpsilon) {
        fail(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
    }
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    return cosine(std::span<const double>(a.values), std::span<const double>(b.values));
}

std::uint64_t sample_seed(std::uint64_t global_seed, const ImageRef& sample) {
    return global_seed ^ digest64(sample.address);
}

PCSRecord pcs_score(const ImageRef& sample, std::span<const ImageRef> references, EmbeddingBackend& encoder,
                    const PerturbConfig& config, ContentStore& store, double threshold) {
    require(!references.empty(), "pcs_score needs at least one reference");
    config.validate();
    PerturbConfig local = config;
    local.seed = sample_seed(config.seed, sample);

    const Image original = store.load(sample);
    const Image padded = pad_to_multiple(original, config.patch_size);
    const ImageRef original_ref = padded == original ? sample : store.put(padded);
    const EmbeddingVector f_o = encoder.embed_image(original_ref);

    auto embed_disturbed = [&](const Image* reference) {
        const Image disturbed = patch_shuffle(padded, local, reference);
        return disturbed == padded ? f_o : encoder.embed_image(store.put(disturbed));
    };

    PCSRecord record;
    record.sample = sample;
    record.threshold = threshold;
    std::optional<EmbeddingVector> shared_disturbed;
    if (config.mode == PerturbMode::ShuffleSelf) {
        shared_disturbed = embed_disturbed(nullptr);
    }
    for (const auto& ref : references) {
        const EmbeddingVector f_r = encoder.embed_image(ref);
        ReferenceSimilarity sim{ref.address, cosine(f_o, f_r), 0.0};
        if (shared_disturbed) {
            sim.s_disturbed = cosine(*shared_disturbed, f_r);
        } else {
            const Image ref_img = resize_nearest(store.load(ref), original.width, original.height);
            sim.s_disturbed = cosine(embed_disturbed(&ref_img), f_r);
        }
        record.per_reference.push_back(std::move(sim));
    }
    for (const auto& r : record.per_reference) {
        record.s_original += r.s_original;
        record.s_disturbed += r.s_disturbed;
    }
    const auto n = static_cast<double>(record.per_reference.size());
    record.s_original /= n;
    record.s_disturbed /= n;
    record.pcs = record.s_original - record.s_disturbed;
    record.kept = record.pcs > threshold;
    return record;
}

std::vector<PCSRecord> pcs_score_batch(std::span<const ImageRef> samples, std::span<const ImageRef> references,
                                       EmbeddingBackend& encoder, const PerturbConfig& config, ContentStore& store,
                                       double threshold, std::size_t threads) {
    std::vector<PCSRecord> out(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        out[i] = pcs_score(samples[i], references, encoder, config, store, threshold);
    });
    return out;
}

std::pair<std::vector<PCSRecord>, std::vector<PCSRecord>> filter_pcs(std::vector<PCSRecord> records, SampleRole role,
                                                                     std::optional<double> tau_override) {
    const double tau = tau_override ? *tau_override : default_threshold(role);
    std::pair<std::vector<PCSRecord>, std::vector<PCSRecord>> out;
    for (auto& r : records) {
        r.threshold = tau;
        r.kept = r.pcs > tau;
        (r.kept ? out.first : out.second).push_back(std::move(r));
    }
    return out;
}

std::pair<std::vector<TextImageRecord>, std::vector<TextImageRecord>> filter_easy_negative(
    std::span<const PromptedSample> samples, EmbeddingBackend& encoder, double tau_text, std::size_t threads) {
    std::vector<TextImageRecord> scored(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        const auto& s = samples[i];
        require(!s.prompt.empty(), "easy-negative sample " + s.image.address + " has no prompt");
        const double sim = cosine(encoder.embed_image(s.image), encoder.embed_text(s.prompt));
        scored[i] = TextImageRecord{s.image, s.prompt, sim, tau_text, sim >= tau_text};
    });
    std::pair<std::vector<TextImageRecord>, std::vector<TextImageRecord>> out;
    for (auto& r : scored) {
        (r.kept ? out.first : out.second).push_back(std::move(r));
    }
    return out;
}

} // namespace catsynth
