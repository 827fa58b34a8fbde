// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace catsynth {

/// Every failure raised by the library carries one of these codes. The CLI
/// folds them into exit-code families (see `family()`).
enum class ErrorCode {
    // configuration
    Config,
    // backends
    Backend,
    Timeout,
    MockMissingFixture,
    MalformedResponse,
    // validation / contract
    Precondition,
    ValidationFailed,
    UnknownDimension,
    DuplicateDimension,
    EmptyTree,
    DuplicateConceptId,
    DimensionEmptiedByDeconfliction,
    SameClassReturned,
    EditCountMismatch,
    ProvenanceMismatch,
    GridMismatch,
    BadFraction,
    ZeroVector,
    DimMismatch,
    EmptyInput,
    UnfilteredEntry,
    DuplicateSample,
    ParseError,
    SchemaError,
    // storage
    Io,
    ContentStore,
};

enum class ErrorFamily { Config, Backend, Validation, Io };

ErrorFamily family(ErrorCode code) noexcept;
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Backend failures keep the transport-level category so retry logic can
/// tell transient from permanent faults.
class BackendError : public Error {
public:
    enum class Kind { Transport, Auth, RateLimit, Server, Client };

    BackendError(Kind kind, const std::string& message);

    Kind kind() const noexcept { return kind_; }
    bool transient() const noexcept;

private:
    Kind kind_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line, std::size_t column);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& field, const std::string& detail = {});

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        fail(ErrorCode::Precondition, message);
    }
}

} // namespace catsynth
