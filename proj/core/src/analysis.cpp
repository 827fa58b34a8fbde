// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "catsynth/error.hpp"
#include "catsynth/random.hpp"
#include "json_util.hpp"

namespace catsynth {

namespace {

double squared_distance(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void check_vectors(std::span<const Vector> vectors) {
    if (vectors.empty()) {
        fail(ErrorCode::EmptyInput, "no vectors to cluster");
    }
    const std::size_t dim = vectors.front().size();
    if (dim == 0) {
        fail(ErrorCode::DimMismatch, "vectors have zero length");
    }
    for (std::size_t i = 1; i < vectors.size(); ++i) {
        if (vectors[i].size() != dim) {
            fail(ErrorCode::DimMismatch, "vector " + std::to_string(i) + " has length " +
                                             std::to_string(vectors[i].size()) + ", expected " +
                                             std::to_string(dim));
        }
    }
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

KMeansResult kmeans(std::span<const Vector> vectors, std::size_t k, std::uint64_t seed, std::size_t max_iters) {
    check_vectors(vectors);
    const std::size_t n = vectors.size();
    require(k >= 1 && k <= n, "k must lie in [1, n], got k=" + std::to_string(k) + " n=" + std::to_string(n));
    require(max_iters >= 1, "max_iters must be >= 1");

    KMeansResult r;
    Rng rng(seed);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::size_t pick = rng.below(n);
    for (std::size_t c = 0; c < k; ++c) {
        r.centroids.push_back(vectors[pick]);
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(vectors[i], r.centroids.back()));
        }
        pick = static_cast<std::size_t>(std::max_element(nearest.begin(), nearest.end()) - nearest.begin());
    }

    const std::size_t dim = vectors.front().size();
    r.assignments.assign(n, k);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = squared_distance(vectors[i], r.centroids[0]);
            for (std::size_t c = 1; c < k; ++c) {
                const double d = squared_distance(vectors[i], r.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            changed |= r.assignments[i] != best;
            r.assignments[i] = best;
            objective += best_d;
        }
        r.objective.push_back(objective);
        r.iterations = iter + 1;
        if (!changed) {
            break;
        }

        std::vector<Vector> sums(k, Vector(dim, 0.0));
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[r.assignments[i]];
            for (std::size_t d = 0; d < dim; ++d) {
                s[d] += vectors[i][d];
            }
            ++sizes[r.assignments[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] == 0) {
                continue;
            }
            for (std::size_t d = 0; d < dim; ++d) {
                r.centroids[c][d] = sums[c][d] / static_cast<double>(sizes[c]);
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) {
                continue;
            }
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = squared_distance(vectors[i], r.centroids[r.assignments[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            r.centroids[c] = vectors[far];
        }
    }
    return r;
}

std::size_t default_cluster_count(std::size_t n) {
    return std::min<std::size_t>({8, (n + 9) / 10, n});
}

DiversityReport diversity_score(std::span<const Vector> vectors, std::optional<std::size_t> k, std::uint64_t seed,
                                bool normalize) {
    check_vectors(vectors);
    std::vector<Vector> points(vectors.begin(), vectors.end());
    if (normalize) {
        for (auto& p : points) {
            double norm = 0.0;
            for (double v : p) {
                norm += v * v;
            }
            norm = std::sqrt(norm);
            if (norm < kZeroNormEpsilon) {
                fail(ErrorCode::ZeroVector, "cannot normalise a zero embedding");
            }
            for (double& v : p) {
                v /= norm;
            }
        }
    }
    DiversityReport report;
    report.k = k ? *k : default_cluster_count(points.size());
    report.seed = seed;
    report.normalized = normalize;
    auto km = kmeans(points, report.k, seed);
    report.assignments = std::move(km.assignments);
    report.centroids = std::move(km.centroids);
    report.iterations = km.iterations;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = std::sqrt(squared_distance(points[i], report.centroids[report.assignments[i]]));
        report.distances.push_back(d);
        report.score += d;
    }
    report.score /= static_cast<double>(points.size());
    return report;
}

std::string to_json_line(const DiversityReport& report) {
    json_util::Json j;
    j["k"] = report.k;
    j["seed"] = report.seed;
    j["iterations"] = report.iterations;
    j["normalized"] = report.normalized;
    j["score"] = report.score;
    j["assignments"] = report.assignments;
    j["distances"] = report.distances;
    j["centroids"] = report.centroids;
    return json_util::line(j);
}

std::vector<double> default_pcs_edges() {
    std::vector<double> edges;
    for (int i = -10; i <= 10; ++i) {
        edges.push_back(i / 10.0);
    }
    return edges;
}

PCSHistogram pcs_histogram(std::span<const double> pcs, std::string role, std::vector<double> edges) {
    require(!pcs.empty(), "histogram needs at least one record");
    if (edges.empty()) {
        edges = default_pcs_edges();
    }
    require(edges.size() >= 2 && std::is_sorted(edges.begin(), edges.end()) &&
                std::adjacent_find(edges.begin(), edges.end()) == edges.end(),
            "bucket edges must be strictly increasing with at least two entries");
    PCSHistogram h;
    h.role = std::move(role);
    h.edges = std::move(edges);
    h.counts.assign(h.edges.size() - 1, 0);
    h.total = pcs.size();
    std::size_t below = 0, between = 0, above = 0;
    for (double v : pcs) {
        auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
        std::size_t bucket = it == h.edges.begin() ? 0 : static_cast<std::size_t>(it - h.edges.begin()) - 1;
        bucket = std::min(bucket, h.counts.size() - 1);
        ++h.counts[bucket];
        if (v < kHardNegativeThreshold) {
            ++below;
        } else if (v > kPositiveThreshold) {
            ++above;
        } else {
            ++between;
        }
    }
    const auto n = static_cast<double>(h.total);
    h.below = static_cast<double>(below) / n;
    h.between = static_cast<double>(between) / n;
    h.above = static_cast<double>(above) / n;
    return h;
}

PCSHistogram pcs_histogram(std::span<const PCSRecord> records, std::string role, std::vector<double> edges) {
    std::vector<double> pcs;
    pcs.reserve(records.size());
    for (const auto& r : records) {
        pcs.push_back(r.pcs);
    }
    return pcs_histogram(pcs, std::move(role), std::move(edges));
}

std::string histogram_csv(const PCSHistogram& h) {
    std::string out = "bucket_edge,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        out += fixed(h.edges[i], 2) + "," + std::to_string(h.counts[i]) + "\n";
    }
    return out;
}

std::string to_json_line(const PCSHistogram& h) {
    json_util::Json j;
    j["role"] = h.role;
    j["edges"] = h.edges;
    j["counts"] = h.counts;
    j["total"] = h.total;
    j["bands"] = {{"<0.1", h.below}, {"0.1-0.3", h.between}, {">0.3", h.above}};
    return json_util::line(j);
}

std::string band_table(std::span<const PCSHistogram> histograms) {
    std::size_t width = 4;
    for (const auto& h : histograms) {
        width = std::max(width, h.role.size());
    }
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(w, s.size()), ' ');
        return s;
    };
    std::string out = pad("Role", width) + "  <0.1     0.1-0.3  >0.3\n";
    for (const auto& h : histograms) {
        out += pad(h.role, width) + "  " + pad(fixed(100.0 * h.below, 1) + "%", 7) + "  " +
               pad(fixed(100.0 * h.between, 1) + "%", 7) + "  " + fixed(100.0 * h.above, 1) + "%\n";
    }
    return out;
}

std::vector<EditDiversityRow> edit_diversity_table(std::span<const EditPlanEmbeddings> plans,
                                                   std::optional<std::size_t> k, std::uint64_t seed) {
    require(!plans.empty(), "edit diversity table needs at least one plan");
    std::vector<EditDiversityRow> rows;
    for (const auto& plan : plans) {
        const std::optional<std::size_t> plan_k =
            k ? std::optional<std::size_t>(std::min(*k, plan.embeddings.size())) : std::nullopt;
        rows.push_back({plan.category, plan.times, diversity_score(plan.embeddings, plan_k, seed).score});
    }
    return rows;
}

std::string render_edit_table(std::span<const EditDiversityRow> rows) {
    std::size_t width = 8;
    for (const auto& r : rows) {
        width = std::max(width, r.category.size());
    }
    std::string out = "Category";
    out.resize(width, ' ');
    out += "  Times  Diversity\n";
    for (const auto& r : rows) {
        std::string line = r.category;
        line.resize(width, ' ');
        std::string times = std::to_string(r.times);
        times.resize(5, ' ');
        out += line + "  " + times + "  " + fixed(r.diversity, 3) + "\n";
    }
    return out;
}

std::string to_json_line(const EditDiversityRow& row) {
    return json_util::line(
        json_util::Json{{"category", row.category}, {"times", row.times}, {"diversity", row.diversity}});
}

} // namespace catsynth
