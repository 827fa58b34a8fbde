// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Hand-rolled random generators for property tests. Everything is driven by
// catsynth::Rng so a failing case can be replayed from its seed.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "catsynth/analysis.hpp"
#include "catsynth/concept_tree.hpp"
#include "catsynth/image.hpp"
#include "catsynth/pcs_filter.hpp"
#include "catsynth/random.hpp"

namespace catsynth::testing {

inline std::string random_word(Rng& rng, std::size_t min_len = 3, std::size_t max_len = 8) {
    const std::size_t len = min_len + rng.below(max_len - min_len + 1);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
        s.push_back(static_cast<char>('a' + rng.below(26)));
    }
    return s;
}

// Names carry their index so uniqueness never depends on luck.
inline Dimension random_dimension(Rng& rng, std::size_t tag, std::size_t max_attrs = 8) {
    Dimension d;
    d.name = "dim" + std::to_string(tag) + "_" + random_word(rng);
    const std::size_t n = 1 + rng.below(max_attrs);
    for (std::size_t i = 0; i < n; ++i) {
        d.attributes.push_back(random_word(rng) + "_" + std::to_string(tag) + "_" + std::to_string(i));
    }
    return d;
}

inline ConceptTree random_tree(Rng& rng, std::size_t max_dims = 8, std::size_t max_attrs = 8) {
    ConceptTree t;
    t.concept_id = "c" + std::to_string(rng.below(1000));
    t.root = random_word(rng);
    const std::size_t n = 1 + rng.below(max_dims);
    for (std::size_t i = 0; i < n; ++i) {
        t.dimensions.push_back(random_dimension(rng, i, max_attrs));
    }
    return t;
}

inline Image random_image(Rng& rng, int width, int height) {
    Image img(width, height);
    for (auto& v : img.rgb) {
        v = static_cast<std::uint8_t>(rng.below(256));
    }
    return img;
}

// Square image of flat 14 px patches: the central half carries a high-contrast
// "foreground" drawn from fg_seed, the rest a low-contrast "background" from
// bg_seed.
inline Image concept_fixture(std::uint64_t fg_seed, std::uint64_t bg_seed, int size = 224, int patch = 14) {
    Image img(size, size);
    const int cells = size / patch;
    Rng fg(fg_seed);
    Rng bg(bg_seed);
    for (int cy = 0; cy < cells; ++cy) {
        for (int cx = 0; cx < cells; ++cx) {
            const bool inside = cx >= cells / 4 && cx < 3 * cells / 4 && cy >= cells / 4 && cy < 3 * cells / 4;
            const auto v = inside ? static_cast<std::uint8_t>(fg.below(2) == 0 ? 20 + fg.below(40) : 195 + fg.below(40))
                                  : static_cast<std::uint8_t>(100 + bg.below(56));
            for (int y = cy * patch; y < (cy + 1) * patch; ++y) {
                for (int x = cx * patch; x < (cx + 1) * patch; ++x) {
                    auto* px = img.at(x, y);
                    px[0] = px[1] = px[2] = v;
                }
            }
        }
    }
    return img;
}

inline std::vector<Vector> random_points(Rng& rng, std::size_t n, std::size_t dim, double scale = 1.0) {
    std::vector<Vector> pts(n, Vector(dim));
    for (auto& p : pts) {
        for (auto& x : p) {
            x = (2.0 * rng.uniform() - 1.0) * scale;
        }
    }
    return pts;
}

inline std::vector<PCSRecord> random_records(Rng& rng, std::size_t n) {
    std::vector<PCSRecord> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].sample.address = "s" + std::to_string(i);
        out[i].s_original = rng.uniform();
        out[i].s_disturbed = rng.uniform();
        out[i].pcs = out[i].s_original - out[i].s_disturbed;
    }
    return out;
}

} // namespace catsynth::testing
