// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/digest.hpp"

#include <array>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "catsynth/error.hpp"

namespace catsynth {

namespace {

std::array<unsigned char, SHA256_DIGEST_LENGTH> sha256(const void* data, std::size_t size) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> out{};
    SHA256(static_cast<const unsigned char*>(data), size, out.data());
    return out;
}

std::string to_hex(std::span<const unsigned char> bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char b : bytes) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0x0f]);
    }
    return out;
}

std::uint64_t leading_u64(const std::array<unsigned char, SHA256_DIGEST_LENGTH>& d) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v = (v << 8) | d[static_cast<std::size_t>(i)];
    }
    return v;
}

} // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    return to_hex(sha256(bytes.data(), bytes.size()));
}

std::string sha256_hex(std::string_view text) {
    return to_hex(sha256(text.data(), text.size()));
}

std::uint64_t digest64(std::span<const std::uint8_t> bytes) {
    return leading_u64(sha256(bytes.data(), bytes.size()));
}

std::uint64_t digest64(std::string_view text) {
    return leading_u64(sha256(text.data(), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) {
        fail(ErrorCode::MalformedResponse, "base64 payload length is not a multiple of 4");
    }
    std::string out(3 * text.size() / 4, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) {
        fail(ErrorCode::MalformedResponse, "invalid base64 payload");
    }
    std::size_t padding = 0;
    if (!text.empty() && text.back() == '=') {
        ++padding;
        if (text.size() > 1 && text[text.size() - 2] == '=') {
            ++padding;
        }
    }
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

} // namespace catsynth
