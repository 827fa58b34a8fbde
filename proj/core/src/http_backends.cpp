// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/http_backends.hpp"

#include <cstdlib>
#include <map>

#ifdef CATSYNTH_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "catsynth/digest.hpp"
#include "json_util.hpp"

namespace catsynth {

using json_util::Json;

const ProviderMapping& provider_mapping(std::string_view provider) {
    static const std::map<std::string, ProviderMapping, std::less<>> table{{"openai", ProviderMapping{}}};
    auto it = table.find(provider);
    if (it == table.end()) {
        fail(ErrorCode::Config, "unknown provider \"" + std::string(provider) + "\"");
    }
    return it->second;
}

HttpJsonClient::HttpJsonClient(BackendConfig config)
    : config_(std::move(config)),
      retry_(config_.max_retries, config_.backoff_seconds),
      limiter_(config_.max_in_flight) {
    config_.validate();
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
        fail(ErrorCode::Config, "endpoint \"" + config_.endpoint + "\" is not an absolute URL");
    }
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    scheme_host_port_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
#ifndef CATSYNTH_HAVE_OPENSSL
    if (config_.endpoint.rfind("https://", 0) == 0) {
        fail(ErrorCode::Config, "https endpoints need a build with OpenSSL");
    }
#endif
    if (!config_.credential_env.empty()) {
        const char* key = std::getenv(config_.credential_env.c_str());
        if (key == nullptr || *key == '\0') {
            fail(ErrorCode::Config, "environment variable " + config_.credential_env + " is not set");
        }
        api_key_ = key;
    }
}

HttpJsonClient::~HttpJsonClient() = default;

std::string HttpJsonClient::post_once(const std::string& body) {
    httplib::Client client(scheme_host_port_);
    const auto secs = static_cast<time_t>(config_.timeout_seconds);
    const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout) {
            fail(ErrorCode::Timeout, config_.endpoint + ": " + httplib::to_string(err));
        }
        throw BackendError(BackendError::Kind::Transport, config_.endpoint + ": " + httplib::to_string(err));
    }
    const int status = res->status;
    if (status >= 200 && status < 300) {
        return res->body;
    }
    const std::string detail = config_.endpoint + " returned HTTP " + std::to_string(status);
    if (status == 401 || status == 403) {
        throw BackendError(BackendError::Kind::Auth, detail);
    }
    if (status == 429) {
        throw BackendError(BackendError::Kind::RateLimit, detail);
    }
    if (status >= 500) {
        throw BackendError(BackendError::Kind::Server, detail);
    }
    throw BackendError(BackendError::Kind::Client, detail);
}

std::string HttpJsonClient::post(const std::string& body) {
    return limiter_.run([&] { return retry_.run([&] { return post_once(body); }); });
}

namespace {

Json parse_reply(const std::string& reply) {
    try {
        return json_util::parse(reply);
    } catch (const Error&) {
        fail(ErrorCode::MalformedResponse, "backend reply is not JSON");
    }
}

const Json& at_pointer(const Json& j, const std::string& pointer) {
    try {
        return j.at(Json::json_pointer(pointer));
    } catch (const nlohmann::json::exception&) {
        fail(ErrorCode::MalformedResponse, "backend reply has no " + pointer);
    }
}

std::string png_b64(const ContentStore& store, const ImageRef& ref) {
    return base64_encode(store.load_bytes(ref));
}

} // namespace

HttpChatBackend::HttpChatBackend(BackendConfig config, std::shared_ptr<const ContentStore> store)
    : client_(std::move(config)), store_(std::move(store)), mapping_(provider_mapping(client_.config().provider)) {}

std::string HttpChatBackend::chat(std::span<const ChatMessage> messages) {
    require(!messages.empty(), "chat needs at least one message");
    Json msgs = Json::array();
    for (const auto& m : messages) {
        Json content = Json::array();
        content.push_back(Json{{"type", "text"}, {"text", m.text}});
        for (const auto& img : m.images) {
            content.push_back(Json{{"type", "image_url"},
                                   {"image_url", {{"url", "data:image/png;base64," + png_b64(*store_, img)}}}});
        }
        msgs.push_back(Json{{"role", m.role}, {"content", std::move(content)}});
    }
    Json body{{"model", client_.config().model}, {"messages", std::move(msgs)}};
    const Json reply = parse_reply(client_.post(body.dump()));
    const Json& text = at_pointer(reply, mapping_.chat_reply_pointer);
    if (!text.is_string()) {
        fail(ErrorCode::MalformedResponse, "chat reply content is not a string");
    }
    return text.get<std::string>();
}

HttpImageBackend::HttpImageBackend(BackendConfig config, std::shared_ptr<ContentStore> store)
    : client_(std::move(config)), store_(std::move(store)), mapping_(provider_mapping(client_.config().provider)) {}

ImageRef HttpImageBackend::generate_image(std::string_view prompt, GenerationMode mode, std::uint64_t seed) {
    require(!prompt.empty(), "prompt must be non-empty");
    Json body{{"model", client_.config().model},
              {"prompt", std::string(prompt)},
              {"seed", seed},
              {"mode", std::string(to_string(mode))},
              {"response_format", "b64_json"}};
    const Json reply = parse_reply(client_.post(body.dump()));
    const Json& b64 = at_pointer(reply, mapping_.image_b64_pointer);
    if (!b64.is_string()) {
        fail(ErrorCode::MalformedResponse, "image payload is not a string");
    }
    const std::string raw = base64_decode(b64.get<std::string>());
    return store_->ingest(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
}

HttpEmbeddingBackend::HttpEmbeddingBackend(BackendConfig config, std::shared_ptr<const ContentStore> store,
                                           std::size_t dim)
    : client_(std::move(config)),
      store_(std::move(store)),
      mapping_(provider_mapping(client_.config().provider)),
      dim_(dim) {}

EmbeddingVector HttpEmbeddingBackend::parse(const std::string& reply) {
    const Json j = parse_reply(reply);
    const Json& arr = at_pointer(j, mapping_.embedding_pointer);
    if (!arr.is_array()) {
        fail(ErrorCode::MalformedResponse, "embedding is not a list");
    }
    EmbeddingVector v{{}, tag()};
    for (const auto& x : arr) {
        if (!x.is_number()) {
            fail(ErrorCode::MalformedResponse, "embedding has a non-numeric entry");
        }
        v.values.push_back(x.get<double>());
    }
    std::size_t expected = 0;
    dim_.compare_exchange_strong(expected, v.dim());
    check_embedding(v, dim_.load());
    return v;
}

EmbeddingVector HttpEmbeddingBackend::embed_image(const ImageRef& image) {
    Json body{{"model", client_.config().model}, {"image", png_b64(*store_, image)}};
    return parse(client_.post(body.dump()));
}

EmbeddingVector HttpEmbeddingBackend::embed_text(std::string_view text) {
    require(!text.empty(), "text must be non-empty");
    Json body{{"model", client_.config().model}, {"input", std::string(text)}};
    return parse(client_.post(body.dump()));
}

} // namespace catsynth
