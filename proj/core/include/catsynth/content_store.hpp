// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "catsynth/backends.hpp"
#include "catsynth/image.hpp"

namespace catsynth {

/// Local directory of PNG files keyed by the SHA-256 of their bytes:
/// `<root>/<hex[0:2]>/<hex>.png`. Writes are atomic and idempotent, so a
/// retried request stores at most one file.
class ContentStore {
public:
    explicit ContentStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    ImageRef put(const Image& image);
    /// Decodes arbitrary image bytes and stores them as canonical PNG.
    ImageRef ingest(std::span<const std::uint8_t> bytes);
    ImageRef ingest_file(const std::filesystem::path& path);

    Image load(const ImageRef& ref) const;
    std::vector<std::uint8_t> load_bytes(const ImageRef& ref) const;
    std::filesystem::path path_of(const ImageRef& ref) const;
    bool contains(const ImageRef& ref) const;

private:
    std::filesystem::path root_;
};

/// Writes `bytes` to `path` through a sibling temp file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

} // namespace catsynth
