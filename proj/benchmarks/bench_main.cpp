// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <filesystem>
#include <memory>

#include "catsynth/analysis.hpp"
#include "catsynth/content_store.hpp"
#include "catsynth/mock_backends.hpp"
#include "catsynth/pcs_filter.hpp"
#include "catsynth/prompt_synth.hpp"
#include "generators.hpp"

namespace {

using namespace catsynth;

void BM_PatchShuffle(benchmark::State& state) {
    Rng rng(1);
    const int side = static_cast<int>(state.range(0));
    const auto img = testing::random_image(rng, side, side);
    PerturbConfig cfg;
    for (auto _ : state) {
        ++cfg.seed;
        benchmark::DoNotOptimize(patch_shuffle(img, cfg));
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(img.rgb.size()));
}
BENCHMARK(BM_PatchShuffle)->Arg(224)->Arg(448)->Arg(896);

void BM_Cosine(benchmark::State& state) {
    Rng rng(2);
    const auto pts = testing::random_points(rng, 2, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(cosine(pts[0], pts[1]));
    }
}
BENCHMARK(BM_Cosine)->Arg(256)->Arg(768)->Arg(4096);

void BM_PcsScore(benchmark::State& state) {
    const auto dir = std::filesystem::temp_directory_path() / "catsynth_bench_pcs";
    std::filesystem::remove_all(dir);
    auto store = std::make_shared<ContentStore>(dir);
    PixelFlattenEncoder encoder(store);
    const auto sample = store->put(testing::concept_fixture(1, 3));
    const std::vector<ImageRef> refs{store->put(testing::concept_fixture(1, 2)),
                                     store->put(testing::concept_fixture(1, 4))};
    for (auto _ : state) {
        benchmark::DoNotOptimize(pcs_score(sample, refs, encoder, PerturbConfig{}, *store, 0.3));
    }
    std::filesystem::remove_all(dir);
}
BENCHMARK(BM_PcsScore);

void BM_KMeans(benchmark::State& state) {
    Rng rng(3);
    const auto pts = testing::random_points(rng, static_cast<std::size_t>(state.range(0)), 256);
    for (auto _ : state) {
        benchmark::DoNotOptimize(kmeans(pts, 8, 11));
    }
}
BENCHMARK(BM_KMeans)->Arg(100)->Arg(1000);

void BM_EnumerateAssignments(benchmark::State& state) {
    ConceptTree tree;
    tree.root = "dog";
    // 8^dims assignments; 7 dims crosses into rejection sampling
    for (int d = 0; d < state.range(0); ++d) {
        Dimension dim{"dim" + std::to_string(d), {}};
        for (int a = 0; a < 8; ++a) {
            dim.attributes.push_back("attr" + std::to_string(d) + "_" + std::to_string(a));
        }
        tree.dimensions.push_back(dim);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(enumerate_assignments(tree, 1000, 5));
    }
}
BENCHMARK(BM_EnumerateAssignments)->Arg(3)->Arg(6)->Arg(7);

} // namespace

BENCHMARK_MAIN();
