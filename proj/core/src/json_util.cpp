// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "json_util.hpp"

#include <algorithm>

namespace catsynth::json_util {

namespace {

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min(byte, text.size());
    for (std::size_t i = 0; i + 1 < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

template <typename J>
J parse_impl(std::string_view text) {
    try {
        return J::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        auto [line, column] = line_column(text, e.byte);
        throw ParseError("malformed JSON", line, column);
    }
}

} // namespace

Json parse(std::string_view text) {
    return parse_impl<Json>(text);
}

OrderedJson parse_ordered(std::string_view text) {
    return parse_impl<OrderedJson>(text);
}

void expect_fields(const Json& j, std::initializer_list<const char*> required,
                   std::initializer_list<const char*> optional, const std::string& where) {
    if (!j.is_object()) {
        throw SchemaError(where.empty() ? "<document>" : where, "expected an object");
    }
    for (const char* field : required) {
        if (!j.contains(field)) {
            throw SchemaError(where + field, "missing field");
        }
    }
    for (const auto& [key, value] : j.items()) {
        auto known = [&key](const char* f) { return key == f; };
        if (std::none_of(required.begin(), required.end(), known) &&
            std::none_of(optional.begin(), optional.end(), known)) {
            throw SchemaError(where + key, "unexpected field");
        }
    }
}

std::string get_string(const Json& j, const char* field, const std::string& where) {
    const auto& v = j.at(field);
    if (!v.is_string()) {
        throw SchemaError(where + field, "expected a string");
    }
    return v.get<std::string>();
}

double get_number(const Json& j, const char* field, const std::string& where) {
    const auto& v = j.at(field);
    if (!v.is_number()) {
        throw SchemaError(where + field, "expected a number");
    }
    return v.get<double>();
}

} // namespace catsynth::json_util
