// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catsynth/pcs_filter.hpp"
#include "catsynth/prompt_synth.hpp"

namespace catsynth {

using Vector = std::vector<double>;

struct KMeansResult {
    std::vector<std::size_t> assignments;
    std::vector<Vector> centroids;
    std::size_t iterations = 0;
    // sum of squared distances after each assignment step
    std::vector<double> objective;
};

/// Lloyd's algorithm. Initialisation picks a seeded random first centre, then
/// repeatedly the point farthest from all chosen centres (lowest index on
/// ties). An emptied cluster is reseeded at the point farthest from its
/// assigned centroid. Stops when assignments repeat or after max_iters.
KMeansResult kmeans(std::span<const Vector> vectors, std::size_t k, std::uint64_t seed, std::size_t max_iters = 100);

struct DiversityReport {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;
    std::vector<Vector> centroids;
    std::vector<double> distances;
    double score = 0.0;
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
    bool normalized = true;
};

/// min(8, ceil(n / 10), n)
std::size_t default_cluster_count(std::size_t n);

/// Mean Euclidean distance of each vector to its assigned centroid.
/// Vectors are L2-normalised first unless `normalize` is false.
DiversityReport diversity_score(std::span<const Vector> vectors, std::optional<std::size_t> k, std::uint64_t seed,
                                bool normalize = true);

std::string to_json_line(const DiversityReport& report);

struct PCSHistogram {
    std::string role;
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::size_t total = 0;
    // bands: pcs < 0.1, 0.1 <= pcs <= 0.3, pcs > 0.3
    double below = 0.0;
    double between = 0.0;
    double above = 0.0;
};

/// Bucket edges -1.0, -0.9, ..., 1.0.
std::vector<double> default_pcs_edges();

/// Bucket i counts edges[i] <= pcs < edges[i + 1]; values outside the edge
/// range fall into the first or last bucket so counts always sum to n.
PCSHistogram pcs_histogram(std::span<const double> pcs, std::string role, std::vector<double> edges = {});
PCSHistogram pcs_histogram(std::span<const PCSRecord> records, std::string role, std::vector<double> edges = {});

/// "bucket_edge,count" lines, one per bucket lower edge.
std::string histogram_csv(const PCSHistogram& h);
std::string to_json_line(const PCSHistogram& h);
/// Band table with columns Role, <0.1, 0.1-0.3, >0.3 (percentages).
std::string band_table(std::span<const PCSHistogram> histograms);

struct EditPlanEmbeddings {
    std::string category;
    std::size_t times = 0;
    std::vector<Vector> embeddings;
};

struct EditDiversityRow {
    std::string category;
    std::size_t times = 0;
    double diversity = 0.0;
};

std::vector<EditDiversityRow> edit_diversity_table(std::span<const EditPlanEmbeddings> plans,
                                                   std::optional<std::size_t> k, std::uint64_t seed);

/// Plain-text table with columns Category, Times, Diversity.
std::string render_edit_table(std::span<const EditDiversityRow> rows);
std::string to_json_line(const EditDiversityRow& row);

} // namespace catsynth
