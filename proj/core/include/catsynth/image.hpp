// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace catsynth {

/// 8-bit interleaved RGB raster.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(int w, int h);

    bool operator==(const Image&) const = default;

    std::uint8_t* at(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
    const std::uint8_t* at(int x, int y) const {
        return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
};

/// PNG bytes; deterministic for identical images.
std::vector<std::uint8_t> encode_png(const Image& image);

/// Any format the codec understands (PNG, JPEG, PPM, ...).
Image decode_image(std::span<const std::uint8_t> bytes);

Image read_image_file(const std::filesystem::path& path);

/// Extends the image right/bottom by replicating the last column/row until
/// both sides are multiples of `multiple`.
Image pad_to_multiple(const Image& image, int multiple);

/// Box-averaged grayscale (mean of R, G, B) on a cols x rows grid, row-major,
/// values in [0, 255].
std::vector<double> downsample_gray(const Image& image, int cols, int rows);

} // namespace catsynth
