// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/content_store.hpp"

#include <atomic>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "catsynth/digest.hpp"
#include "catsynth/error.hpp"

namespace fs = std::filesystem;

namespace catsynth {

namespace {

std::string temp_suffix() {
    static std::atomic<std::uint64_t> counter{0};
    std::ostringstream s;
    s << ".tmp." << ::getpid() << "." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "."
      << counter.fetch_add(1);
    return s.str();
}

} // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) {
            fail(ErrorCode::Io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    fs::path tmp = path;
    tmp += temp_suffix();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            fail(ErrorCode::Io, "cannot write " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            fs::remove(tmp, ec);
            fail(ErrorCode::Io, "short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(ErrorCode::Io, "cannot move result into place at " + path.string());
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::Io, "cannot read " + path.string());
    }
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

ContentStore::ContentStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) {
        fail(ErrorCode::ContentStore, "cannot create content store at " + root_.string() + ": " + ec.message());
    }
}

ImageRef ContentStore::put(const Image& image) {
    const auto png = encode_png(image);
    const std::string hex = sha256_hex(png);
    ImageRef ref{hex.substr(0, 2) + "/" + hex + ".png", image.width, image.height, "rgb8"};
    const fs::path path = path_of(ref);
    if (!fs::exists(path)) {
        try {
            write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
        } catch (const Error& e) {
            fail(ErrorCode::ContentStore, e.what());
        }
    }
    return ref;
}

ImageRef ContentStore::ingest(std::span<const std::uint8_t> bytes) {
    return put(decode_image(bytes));
}

ImageRef ContentStore::ingest_file(const fs::path& path) {
    return put(read_image_file(path));
}

fs::path ContentStore::path_of(const ImageRef& ref) const {
    if (ref.address.empty() || ref.address.find("..") != std::string::npos || ref.address.front() == '/') {
        fail(ErrorCode::ContentStore, "invalid content address \"" + ref.address + "\"");
    }
    return root_ / ref.address;
}

bool ContentStore::contains(const ImageRef& ref) const {
    return fs::exists(path_of(ref));
}

std::vector<std::uint8_t> ContentStore::load_bytes(const ImageRef& ref) const {
    const auto path = path_of(ref);
    if (!fs::exists(path)) {
        fail(ErrorCode::ContentStore, "missing object " + ref.address);
    }
    std::string raw = read_file(path);
    return {raw.begin(), raw.end()};
}

Image ContentStore::load(const ImageRef& ref) const {
    return decode_image(load_bytes(ref));
}

} // namespace catsynth
