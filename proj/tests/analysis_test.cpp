// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "catsynth/analysis.hpp"
#include "catsynth/error.hpp"
#include "generators.hpp"

namespace catsynth {
namespace {

using testing::random_points;

double dist(const Vector& a, const Vector& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

double mean_distance_to_mean(const std::vector<Vector>& pts) {
    Vector mean(pts[0].size(), 0.0);
    for (const auto& p : pts) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            mean[i] += p[i] / static_cast<double>(pts.size());
        }
    }
    double total = 0;
    for (const auto& p : pts) {
        total += dist(p, mean);
    }
    return total / static_cast<double>(pts.size());
}

// Best 2-partition by within-cluster sum of squares, as a bitmask of the
// points sharing a side with point 0 (bit 0 always set).
unsigned best_bipartition(const std::vector<Vector>& pts) {
    const unsigned n = static_cast<unsigned>(pts.size());
    double best = std::numeric_limits<double>::infinity();
    unsigned best_mask = 0;
    for (unsigned mask = 1; mask < (1u << n); mask += 2) {
        if (mask == (1u << n) - 1) {
            continue;
        }
        double sse = 0;
        for (int side = 0; side < 2; ++side) {
            std::vector<Vector> group;
            for (unsigned i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) == static_cast<unsigned>(side == 0)) {
                    group.push_back(pts[i]);
                }
            }
            Vector c(pts[0].size(), 0.0);
            for (const auto& p : group) {
                for (std::size_t d = 0; d < c.size(); ++d) {
                    c[d] += p[d] / static_cast<double>(group.size());
                }
            }
            for (const auto& p : group) {
                sse += dist(p, c) * dist(p, c);
            }
        }
        if (sse < best) {
            best = sse;
            best_mask = mask;
        }
    }
    return best_mask;
}

TEST(KMeans, HandExamples) {
    const std::vector<Vector> same(5, Vector{0.3, -1.2});
    const auto r = kmeans(same, 1, 7);
    EXPECT_EQ(r.centroids[0], (Vector{0.3, -1.2}));
    const std::vector<Vector> two{{0, 0}, {2, 0}};
    const auto d = diversity_score(two, 1, 0, false);
    EXPECT_DOUBLE_EQ(d.centroids[0][0], 1.0);
    EXPECT_DOUBLE_EQ(d.centroids[0][1], 0.0);
    EXPECT_EQ(d.distances, (std::vector<double>{1.0, 1.0}));
    EXPECT_DOUBLE_EQ(d.score, 1.0);
    EXPECT_DOUBLE_EQ(diversity_score(same, 1, 3).score, 0.0);
}

TEST(KMeans, Errors) {
    const std::vector<Vector> none;
    EXPECT_THROW(kmeans(none, 1, 0), Error);
    try {
        kmeans(none, 1, 0);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
    }
    const std::vector<Vector> ragged{{1, 2}, {1}};
    try {
        kmeans(ragged, 1, 0);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
    }
    const std::vector<Vector> two{{1, 2}, {3, 4}};
    EXPECT_THROW(kmeans(two, 3, 0), Error);
    EXPECT_THROW(kmeans(two, 0, 0), Error);
}

TEST(KMeans, SingleClusterMatchesMeanDistanceOracle) {
    Rng rng(21);
    for (int draw = 0; draw < 1000; ++draw) {
        const auto pts = random_points(rng, 1 + rng.below(10), 1 + rng.below(4), 5.0);
        const auto r = diversity_score(pts, 1, rng.next(), false);
        ASSERT_NEAR(r.score, mean_distance_to_mean(pts), 1e-9) << "draw " << draw;
    }
}

TEST(KMeans, TwoFarClustersMatchExhaustivePartition) {
    Rng rng(22);
    for (int draw = 0; draw < 200; ++draw) {
        const std::size_t dim = 1 + rng.below(4);
        const std::size_t na = 1 + rng.below(5), nb = 1 + rng.below(5);
        std::vector<Vector> pts;
        for (std::size_t i = 0; i < na + nb; ++i) {
            Vector p = random_points(rng, 1, dim, 0.5)[0];
            p[0] += i < na ? -20.0 : 20.0;
            pts.push_back(p);
        }
        rng.shuffle(std::span<Vector>(pts));
        const unsigned mask = best_bipartition(pts);
        const auto r = kmeans(pts, 2, rng.next());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const bool with_first = r.assignments[i] == r.assignments[0];
            ASSERT_EQ(with_first, ((mask >> i) & 1u) == 1u) << "draw " << draw << " point " << i;
        }
    }
}

TEST(KMeans, ObjectiveNeverIncreasesAndIsDeterministic) {
    Rng rng(23);
    for (int draw = 0; draw < 200; ++draw) {
        const auto pts = random_points(rng, 2 + rng.below(60), 1 + rng.below(6));
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(pts.size(), 8));
        const auto seed = rng.next();
        const auto r = kmeans(pts, k, seed);
        for (std::size_t i = 1; i < r.objective.size(); ++i) {
            ASSERT_LE(r.objective[i], r.objective[i - 1] + 1e-9);
        }
        const auto again = kmeans(pts, k, seed);
        EXPECT_EQ(r.assignments, again.assignments);
        EXPECT_EQ(r.centroids, again.centroids);
        std::vector<std::size_t> sizes(k, 0);
        for (auto a : r.assignments) {
            ++sizes[a];
        }
        EXPECT_TRUE(std::all_of(sizes.begin(), sizes.end(), [](auto s) { return s > 0; }));
    }
}

TEST(Diversity, ScoreIsMeanOfDistancesAndNonNegative) {
    Rng rng(24);
    for (int draw = 0; draw < 200; ++draw) {
        const auto pts = random_points(rng, 1 + rng.below(40), 2 + rng.below(6));
        const auto r = diversity_score(pts, std::nullopt, rng.next());
        EXPECT_EQ(r.k, default_cluster_count(pts.size()));
        double sum = 0;
        for (double d : r.distances) {
            EXPECT_GE(d, 0.0);
            sum += d;
        }
        EXPECT_NEAR(r.score, sum / static_cast<double>(pts.size()), 1e-9);
        // normalised points lie on the unit sphere, so no distance exceeds 2
        EXPECT_LE(r.score, 2.0 + 1e-9);
    }
}

TEST(Diversity, DefaultClusterCount) {
    EXPECT_EQ(default_cluster_count(1), 1u);
    EXPECT_EQ(default_cluster_count(10), 1u);
    EXPECT_EQ(default_cluster_count(11), 2u);
    EXPECT_EQ(default_cluster_count(75), 8u);
    EXPECT_EQ(default_cluster_count(1000), 8u);
}

TEST(Diversity, SupersetWithFarPointScoresHigher) {
    // S = {(0,0),(2,0)}: mean (1,0), score 1.
    // T adds (10,0): mean (4,0), distances 4,2,6, score 4.
    const std::vector<Vector> s{{0, 0}, {2, 0}};
    const std::vector<Vector> t{{0, 0}, {2, 0}, {10, 0}};
    const double ss = diversity_score(s, 1, 0, false).score;
    const double st = diversity_score(t, 1, 0, false).score;
    EXPECT_DOUBLE_EQ(ss, 1.0);
    EXPECT_DOUBLE_EQ(st, 4.0);
    EXPECT_GT(st, ss);
}

TEST(Histogram, BandsAndBuckets) {
    const std::vector<double> pcs{0.05, 0.2, 0.4};
    const auto h = pcs_histogram(pcs, "positive");
    EXPECT_DOUBLE_EQ(h.below, 1.0 / 3);
    EXPECT_DOUBLE_EQ(h.between, 1.0 / 3);
    EXPECT_DOUBLE_EQ(h.above, 1.0 / 3);
    const std::vector<double> zeros(7, 0.0);
    EXPECT_EQ(pcs_histogram(zeros, "x").below, 1.0);
    const std::vector<double> edges{0.1, 0.3};
    const auto b = pcs_histogram(edges, "edges");
    EXPECT_EQ(b.between, 1.0);
    EXPECT_THROW(pcs_histogram(std::vector<double>{}, "x"), Error);
}

TEST(Histogram, CountsSumAndFractionsSumToOne) {
    Rng rng(25);
    for (int draw = 0; draw < 300; ++draw) {
        const std::size_t n = 1 + rng.below(200);
        std::vector<double> pcs(n);
        for (auto& v : pcs) {
            v = rng.uniform() * 2.4 - 1.2;
        }
        const auto h = pcs_histogram(pcs, "r");
        std::size_t total = 0;
        for (std::size_t i = 0; i < h.counts.size(); ++i) {
            total += h.counts[i];
            std::size_t expect = 0;
            for (double v : pcs) {
                const bool first = i == 0 && v < h.edges[0];
                const bool last = i + 1 == h.counts.size() && v >= h.edges.back();
                expect += (first || last || (v >= h.edges[i] && v < h.edges[i + 1])) ? 1 : 0;
            }
            ASSERT_EQ(h.counts[i], expect);
        }
        EXPECT_EQ(total, n);
        EXPECT_NEAR(h.below + h.between + h.above, 1.0, 1e-12);
    }
}

TEST(Reports, TableFormats) {
    const std::vector<double> pcs{0.05, 0.2, 0.4, 0.5};
    const std::vector<PCSHistogram> hs{pcs_histogram(pcs, "synthetic")};
    EXPECT_EQ(band_table(hs),
              "Role       <0.1     0.1-0.3  >0.3\n"
              "synthetic  25.0%    25.0%    50.0%\n");
    const auto csv = histogram_csv(hs[0]);
    EXPECT_EQ(csv.substr(0, csv.find('\n', 18) + 1), "bucket_edge,count\n-1.00,0\n");
    EXPECT_NE(csv.find("\n0.40,1\n"), std::string::npos);

    Rng rng(26);
    const auto emb = random_points(rng, 12, 4);
    const std::vector<EditPlanEmbeddings> plans{{"None", 0, emb}, {"Add", 1, emb}, {"Remove", 2, {Vector{1, 2, 3, 4}}}};
    const auto rows = edit_diversity_table(plans, 1, 5);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].diversity, rows[1].diversity);
    EXPECT_EQ(rows[2].diversity, 0.0);
    const auto table = render_edit_table(rows);
    EXPECT_EQ(table.substr(0, table.find('\n')), "Category  Times  Diversity");
    EXPECT_NE(table.find("Remove    2      0.000\n"), std::string::npos);
    EXPECT_NE(to_json_line(rows[0]).find("\"category\""), std::string::npos);
}

} // namespace
} // namespace catsynth
