// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/backends.hpp"

#include <cmath>
#include <thread>

namespace catsynth {

void BackendConfig::validate() const {
    if (!(timeout_seconds > 0.0)) {
        fail(ErrorCode::Config, "backend timeout must be > 0");
    }
    if (max_retries < 0) {
        fail(ErrorCode::Config, "max_retries must be >= 0");
    }
    if (max_in_flight < 1) {
        fail(ErrorCode::Config, "max_in_flight must be >= 1");
    }
    if (backoff_seconds < 0.0) {
        fail(ErrorCode::Config, "backoff must be >= 0");
    }
}

std::string_view to_string(GenerationMode mode) noexcept {
    return mode == GenerationMode::FinetunedSubject ? "finetuned" : "base";
}

std::optional<GenerationMode> generation_mode_from_string(std::string_view s) noexcept {
    if (s == "finetuned" || s == "finetuned_subject") {
        return GenerationMode::FinetunedSubject;
    }
    if (s == "base") {
        return GenerationMode::Base;
    }
    return std::nullopt;
}

RetryPolicy::RetryPolicy(int max_retries, double backoff_seconds, Sleeper sleeper)
    : max_retries_(max_retries), backoff_seconds_(backoff_seconds), sleeper_(std::move(sleeper)) {
    if (!sleeper_) {
        sleeper_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
    }
}

bool RetryPolicy::is_transient(const Error& e) noexcept {
    if (e.code() == ErrorCode::Timeout) {
        return true;
    }
    if (const auto* be = dynamic_cast<const BackendError*>(&e)) {
        return be->transient();
    }
    return false;
}

void RetryPolicy::pause(int attempt) const {
    sleeper_(std::chrono::duration<double>(backoff_seconds_ * std::ldexp(1.0, attempt)));
}

InFlightLimiter::InFlightLimiter(int max_in_flight) : slots_(max_in_flight < 1 ? 1 : max_in_flight) {}

void check_embedding(const EmbeddingVector& v, std::size_t expected_dim) {
    if (v.values.empty()) {
        fail(ErrorCode::DimMismatch, "encoder returned an empty vector");
    }
    if (expected_dim != 0 && v.dim() != expected_dim) {
        fail(ErrorCode::DimMismatch, "encoder " + v.encoder + " returned " + std::to_string(v.dim()) +
                                         " values, expected " + std::to_string(expected_dim));
    }
    for (double x : v.values) {
        if (!std::isfinite(x)) {
            fail(ErrorCode::MalformedResponse, "encoder " + v.encoder + " returned a non-finite value");
        }
    }
}

CachedEmbedder::CachedEmbedder(std::shared_ptr<EmbeddingBackend> inner) : inner_(std::move(inner)) {}

EmbeddingVector CachedEmbedder::checked(EmbeddingVector v) const {
    check_embedding(v, inner_->dim());
    return v;
}

EmbeddingVector CachedEmbedder::embed_image(const ImageRef& image) {
    {
        std::lock_guard lock(mutex_);
        if (auto it = images_.find(image.address); it != images_.end()) {
            return it->second;
        }
    }
    ++inner_calls_;
    EmbeddingVector v = checked(inner_->embed_image(image));
    std::lock_guard lock(mutex_);
    return images_.emplace(image.address, std::move(v)).first->second;
}

EmbeddingVector CachedEmbedder::embed_text(std::string_view text) {
    const std::string key(text);
    {
        std::lock_guard lock(mutex_);
        if (auto it = texts_.find(key); it != texts_.end()) {
            return it->second;
        }
    }
    ++inner_calls_;
    EmbeddingVector v = checked(inner_->embed_text(text));
    std::lock_guard lock(mutex_);
    return texts_.emplace(key, std::move(v)).first->second;
}

} // namespace catsynth
