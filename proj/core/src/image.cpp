// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/image.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "catsynth/error.hpp"

namespace catsynth {

Image::Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

namespace {

// OpenCV stores BGR.
void swap_red_blue(std::uint8_t* data, std::size_t pixels) {
    for (std::size_t i = 0; i < pixels; ++i) {
        std::swap(data[3 * i], data[3 * i + 2]);
    }
}

} // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
    require(image.width > 0 && image.height > 0, "cannot encode an empty image");
    cv::Mat bgr(image.height, image.width, CV_8UC3);
    std::copy(image.rgb.begin(), image.rgb.end(), bgr.data);
    swap_red_blue(bgr.data, static_cast<std::size_t>(image.width) * image.height);
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", bgr, out, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
        fail(ErrorCode::Io, "PNG encoding failed");
    }
    return out;
}

Image decode_image(std::span<const std::uint8_t> bytes) {
    cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
    if (bgr.empty()) {
        fail(ErrorCode::Io, "unrecognized or corrupt image data");
    }
    Image img(bgr.cols, bgr.rows);
    for (int y = 0; y < bgr.rows; ++y) {
        std::copy_n(bgr.ptr<std::uint8_t>(y), 3 * bgr.cols, img.at(0, y));
    }
    swap_red_blue(img.rgb.data(), static_cast<std::size_t>(img.width) * img.height);
    return img;
}

Image read_image_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::Io, "cannot open image " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_image(bytes);
}

Image pad_to_multiple(const Image& image, int multiple) {
    require(multiple >= 1, "pad multiple must be >= 1");
    const int w = (image.width + multiple - 1) / multiple * multiple;
    const int h = (image.height + multiple - 1) / multiple * multiple;
    if (w == image.width && h == image.height) {
        return image;
    }
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        const int sy = std::min(y, image.height - 1);
        for (int x = 0; x < w; ++x) {
            const int sx = std::min(x, image.width - 1);
            std::copy_n(image.at(sx, sy), 3, out.at(x, y));
        }
    }
    return out;
}

std::vector<double> downsample_gray(const Image& image, int cols, int rows) {
    require(image.width > 0 && image.height > 0, "cannot downsample an empty image");
    require(cols > 0 && rows > 0, "downsample grid must be positive");
    std::vector<double> out(static_cast<std::size_t>(cols) * rows, 0.0);
    for (int r = 0; r < rows; ++r) {
        const int y0 = r * image.height / rows;
        const int y1 = std::max(y0 + 1, (r + 1) * image.height / rows);
        for (int c = 0; c < cols; ++c) {
            const int x0 = c * image.width / cols;
            const int x1 = std::max(x0 + 1, (c + 1) * image.width / cols);
            double sum = 0.0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const auto* p = image.at(x, y);
                    sum += (static_cast<double>(p[0]) + p[1] + p[2]) / 3.0;
                }
            }
            out[static_cast<std::size_t>(r) * cols + c] = sum / ((y1 - y0) * (x1 - x0));
        }
    }
    return out;
}

} // namespace catsynth
