// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "catsynth/backends.hpp"
#include "catsynth/content_store.hpp"

namespace catsynth {

/// Where the interesting fields live in a provider's JSON. Pointers use
/// RFC 6901 syntax.
///
/// Requests always have this shape (keys of the active mapping):
///   chat:  {"model", "messages": [{"role", "content": [{"type": "text", "text"},
///           {"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}}]}]}
///   image: {"model", "prompt", "seed", "mode": "finetuned"|"base", "response_format": "b64_json"}
///   embed: {"model", "input": "<text>"} or {"model", "image": "<base64 png>"}
struct ProviderMapping {
    std::string chat_reply_pointer = "/choices/0/message/content";
    std::string image_b64_pointer = "/data/0/b64_json";
    std::string embedding_pointer = "/data/0/embedding";
};

/// Built-in table: "openai" (the default shape above).
const ProviderMapping& provider_mapping(std::string_view provider);

/// Minimal synchronous JSON-over-HTTP transport shared by the three clients.
/// Maps HTTP status to BackendError kinds and applies retries, timeouts and
/// the in-flight limit from the config.
class HttpJsonClient {
public:
    explicit HttpJsonClient(BackendConfig config);
    ~HttpJsonClient();

    std::string post(const std::string& body);

    const BackendConfig& config() const noexcept { return config_; }

private:
    std::string post_once(const std::string& body);

    BackendConfig config_;
    std::string scheme_host_port_;
    std::string path_;
    std::string api_key_;
    RetryPolicy retry_;
    InFlightLimiter limiter_;
};

class HttpChatBackend final : public ChatBackend {
public:
    HttpChatBackend(BackendConfig config, std::shared_ptr<const ContentStore> store);

    std::string chat(std::span<const ChatMessage> messages) override;

private:
    HttpJsonClient client_;
    std::shared_ptr<const ContentStore> store_;
    const ProviderMapping& mapping_;
};

class HttpImageBackend final : public ImageBackend {
public:
    HttpImageBackend(BackendConfig config, std::shared_ptr<ContentStore> store);

    ImageRef generate_image(std::string_view prompt, GenerationMode mode, std::uint64_t seed) override;

private:
    HttpJsonClient client_;
    std::shared_ptr<ContentStore> store_;
    const ProviderMapping& mapping_;
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
public:
    /// `dim` = 0 accepts whatever length the first reply has and pins it.
    HttpEmbeddingBackend(BackendConfig config, std::shared_ptr<const ContentStore> store, std::size_t dim = 0);

    std::string tag() const override { return client_.config().model; }
    std::size_t dim() const override { return dim_.load(); }
    EmbeddingVector embed_image(const ImageRef& image) override;
    EmbeddingVector embed_text(std::string_view text) override;

private:
    EmbeddingVector parse(const std::string& reply);

    HttpJsonClient client_;
    std::shared_ptr<const ContentStore> store_;
    const ProviderMapping& mapping_;
    std::atomic<std::size_t> dim_;
};

} // namespace catsynth
