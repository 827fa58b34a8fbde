// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catsynth/error.hpp"

namespace catsynth {

struct BackendConfig {
    // Full URL of the service endpoint, e.g. https://api.example.com/v1/chat/completions
    std::string endpoint;
    // Name of the environment variable holding the API key; empty = no auth.
    std::string credential_env;
    std::string model;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    int max_in_flight = 4;
    // First retry delay; doubles per attempt.
    double backoff_seconds = 0.5;
    // Key into the provider mapping table (see http_backends.hpp).
    std::string provider = "openai";

    /// Throws Config on violated invariants.
    void validate() const;
};

/// Content-addressed image handle. `address` is relative to the content store root.
struct ImageRef {
    std::string address;
    int width = 0;
    int height = 0;
    std::string pixel_format = "rgb8";

    bool operator==(const ImageRef&) const = default;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string encoder;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

struct ChatMessage {
    std::string role;
    std::string text;
    std::vector<ImageRef> images;

    bool operator==(const ChatMessage&) const = default;
};

enum class GenerationMode { FinetunedSubject, Base };

std::string_view to_string(GenerationMode mode) noexcept;
std::optional<GenerationMode> generation_mode_from_string(std::string_view s) noexcept;

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Reply text for a non-empty conversation.
    virtual std::string chat(std::span<const ChatMessage> messages) = 0;
};

class ImageBackend {
public:
    virtual ~ImageBackend() = default;
    /// Generates and persists an image; the returned ref addresses the content store.
    virtual ImageRef generate_image(std::string_view prompt, GenerationMode mode, std::uint64_t seed) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::string tag() const = 0;
    /// Expected vector length; 0 when unknown until the first call.
    virtual std::size_t dim() const = 0;
    virtual EmbeddingVector embed_image(const ImageRef& image) = 0;
    virtual EmbeddingVector embed_text(std::string_view text) = 0;
};

/// Bounded retries with exponential backoff for transient backend failures
/// (transport, rate limit, server, timeout). Other errors propagate at once.
class RetryPolicy {
public:
    using Sleeper = std::function<void(std::chrono::duration<double>)>;

    RetryPolicy(int max_retries, double backoff_seconds, Sleeper sleeper = {});

    template <typename F>
    auto run(F&& call) const -> decltype(call()) {
        for (int attempt = 0;; ++attempt) {
            try {
                return call();
            } catch (const Error& e) {
                if (attempt >= max_retries_ || !is_transient(e)) {
                    throw;
                }
                pause(attempt);
            }
        }
    }

    static bool is_transient(const Error& e) noexcept;

private:
    void pause(int attempt) const;

    int max_retries_;
    double backoff_seconds_;
    Sleeper sleeper_;
};

/// Caps concurrent requests against one backend.
class InFlightLimiter {
public:
    explicit InFlightLimiter(int max_in_flight);

    template <typename F>
    auto run(F&& call) -> decltype(call()) {
        slots_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{slots_};
        return call();
    }

private:
    std::counting_semaphore<> slots_;
};

/// Insert-only cache in front of another encoder, keyed by content address.
/// `inner_calls()` counts requests that reached the wrapped encoder.
class CachedEmbedder final : public EmbeddingBackend {
public:
    explicit CachedEmbedder(std::shared_ptr<EmbeddingBackend> inner);

    std::string tag() const override { return inner_->tag(); }
    std::size_t dim() const override { return inner_->dim(); }
    EmbeddingVector embed_image(const ImageRef& image) override;
    EmbeddingVector embed_text(std::string_view text) override;

    std::size_t inner_calls() const noexcept { return inner_calls_.load(); }

private:
    EmbeddingVector checked(EmbeddingVector v) const;

    std::shared_ptr<EmbeddingBackend> inner_;
    std::mutex mutex_;
    std::map<std::string, EmbeddingVector> images_;
    std::map<std::string, EmbeddingVector> texts_;
    std::atomic<std::size_t> inner_calls_{0};
};

/// Rejects non-finite values and lengths that disagree with the encoder's dim.
void check_embedding(const EmbeddingVector& v, std::size_t expected_dim);

} // namespace catsynth
