// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "catsynth/error.hpp"

namespace catsynth::json_util {

// std::map-backed objects: keys always serialize sorted.
using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Parses `text`, converting parse failures into ParseError with line/column.
Json parse(std::string_view text);
OrderedJson parse_ordered(std::string_view text);

/// Every `required` field must exist; fields outside required ∪ optional are
/// rejected. Field names in errors are prefixed with `where`.
void expect_fields(const Json& j, std::initializer_list<const char*> required,
                   std::initializer_list<const char*> optional, const std::string& where);

std::string get_string(const Json& j, const char* field, const std::string& where);
double get_number(const Json& j, const char* field, const std::string& where);

/// Single-line canonical dump used for JSONL records.
inline std::string line(const Json& j) {
    return j.dump(-1, ' ', false, Json::error_handler_t::strict);
}

} // namespace catsynth::json_util
