// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace catsynth {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// First 8 bytes of SHA-256, big-endian. Stable across platforms.
std::uint64_t digest64(std::span<const std::uint8_t> bytes);
std::uint64_t digest64(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_decode(std::string_view text);

} // namespace catsynth
