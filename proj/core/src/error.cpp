// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/error.hpp"

namespace catsynth {

ErrorFamily family(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::Config:
        return ErrorFamily::Config;
    case ErrorCode::Backend:
    case ErrorCode::Timeout:
    case ErrorCode::MockMissingFixture:
    case ErrorCode::MalformedResponse:
        return ErrorFamily::Backend;
    case ErrorCode::Io:
    case ErrorCode::ContentStore:
        return ErrorFamily::Io;
    default:
        return ErrorFamily::Validation;
    }
}

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::Config: return "Config";
    case ErrorCode::Backend: return "BackendError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MockMissingFixture: return "MockMissingFixture";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::Precondition: return "Precondition";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::UnknownDimension: return "UnknownDimension";
    case ErrorCode::DuplicateDimension: return "DuplicateDimension";
    case ErrorCode::EmptyTree: return "EmptyTree";
    case ErrorCode::DuplicateConceptId: return "DuplicateConceptId";
    case ErrorCode::DimensionEmptiedByDeconfliction: return "DimensionEmptiedByDeconfliction";
    case ErrorCode::SameClassReturned: return "SameClassReturned";
    case ErrorCode::EditCountMismatch: return "EditCountMismatch";
    case ErrorCode::ProvenanceMismatch: return "ProvenanceMismatch";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::BadFraction: return "BadFraction";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnfilteredEntry: return "UnfilteredEntry";
    case ErrorCode::DuplicateSample: return "DuplicateSample";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::ContentStore: return "ContentStoreError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

namespace {

std::string_view kind_name(BackendError::Kind kind) {
    switch (kind) {
    case BackendError::Kind::Transport: return "transport";
    case BackendError::Kind::Auth: return "auth";
    case BackendError::Kind::RateLimit: return "rate_limit";
    case BackendError::Kind::Server: return "server";
    case BackendError::Kind::Client: return "client";
    }
    return "unknown";
}

} // namespace

BackendError::BackendError(Kind kind, const std::string& message)
    : Error(ErrorCode::Backend, std::string(kind_name(kind)) + ": " + message), kind_(kind) {}

bool BackendError::transient() const noexcept {
    return kind_ == Kind::Transport || kind_ == Kind::RateLimit || kind_ == Kind::Server;
}

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column)
    : Error(ErrorCode::ParseError,
            message + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
      line_(line), column_(column) {}

SchemaError::SchemaError(const std::string& field, const std::string& detail)
    : Error(ErrorCode::SchemaError, detail.empty() ? field : field + ": " + detail), field_(field) {}

void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace catsynth
