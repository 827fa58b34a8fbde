// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catsynth/backends.hpp"
#include "catsynth/content_store.hpp"
#include "catsynth/image.hpp"

namespace catsynth {

/// SHA-256 over the canonical JSON of the conversation (role, text, image
/// addresses). Mock chat fixtures are keyed by this value.
std::string message_digest(std::span<const ChatMessage> messages);

/// Canned chat replies keyed by message digest. Repeated requests with the
/// same digest walk through the reply list and then stick at the last one.
struct MockFixtures {
    std::map<std::string, std::vector<std::string>> replies;

    void add(std::span<const ChatMessage> messages, std::vector<std::string> sequence);
    void add_key(std::string key, std::vector<std::string> sequence);
    void merge(const MockFixtures& other);

    /// {"fixtures": [{"key": ..., "replies": [...]}, ...]}; entries may give
    /// "messages" instead of "key", in which case the digest is computed on load.
    static MockFixtures load(const std::filesystem::path& path);
    static MockFixtures from_json(std::string_view document);
    std::string to_json() const;
    void save(const std::filesystem::path& path) const;
};

class MockChat final : public ChatBackend {
public:
    explicit MockChat(MockFixtures fixtures, BackendConfig config = default_config());

    std::string chat(std::span<const ChatMessage> messages) override;

    /// The next `count` requests fail with a transient transport error.
    void inject_transient_faults(int count) { pending_faults_ = count; }

    std::size_t calls() const noexcept { return calls_.load(); }

    static BackendConfig default_config();

private:
    std::string answer(const std::string& key);

    MockFixtures fixtures_;
    BackendConfig config_;
    RetryPolicy retry_;
    InFlightLimiter limiter_;
    std::mutex mutex_;
    std::map<std::string, std::size_t> cursor_;
    std::atomic<int> pending_faults_{0};
    std::atomic<std::size_t> calls_{0};
};

/// Procedural stand-in for an image generator.
///
/// The prompt "a photo of <ctx1>, <ctx2>, ..., <subject phrase>" is split at
/// the last ", ". The canvas is a grid x grid array of cells; the central half
/// of the grid in each direction is the subject region, the rest is background.
///  - background cells take muted (near mid-gray) colors derived from the
///    context,
///  - subject cells take vivid colors derived from the class word (last word
///    of the subject phrase),
///  - in finetuned mode, subject cells on even checkerboard squares take
///    identity colors derived from the full subject phrase,
///  - with a seed, every channel gets uniform integer noise in [-noise, noise].
/// Identical (prompt, mode, seed) always yields identical pixels.
struct MockRenderSpec {
    int width = 224;
    int height = 224;
    int grid = 8;
    int noise = 6;
};

Image render_mock_image(std::string_view prompt, GenerationMode mode, std::optional<std::uint64_t> seed,
                        const MockRenderSpec& spec = {});

class MockImageGenerator final : public ImageBackend {
public:
    MockImageGenerator(std::shared_ptr<ContentStore> store, MockRenderSpec spec = {});

    ImageRef generate_image(std::string_view prompt, GenerationMode mode, std::uint64_t seed) override;

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::shared_ptr<ContentStore> store_;
    MockRenderSpec spec_;
    std::atomic<std::size_t> calls_{0};
};

/// 16x16 box-averaged grayscale (one value per 14 px patch at 224 px), each value mapped to [-1, 1] via g / 127.5 - 1.
std::vector<double> pixel_flatten(const Image& image);

/// Mock encoder: images -> pixel_flatten. Text -> pixel_flatten of the
/// noise-free base-mode mock rendering of the text, unless a fixture vector
/// was registered for that exact text.
class PixelFlattenEncoder final : public EmbeddingBackend {
public:
    static constexpr std::size_t kDim = 256;
    static constexpr const char* kTag = "mock-pixel-flatten-16x16";

    explicit PixelFlattenEncoder(std::shared_ptr<const ContentStore> store, MockRenderSpec spec = {});

    std::string tag() const override { return kTag; }
    std::size_t dim() const override { return kDim; }
    EmbeddingVector embed_image(const ImageRef& image) override;
    EmbeddingVector embed_text(std::string_view text) override;

    void set_text_vector(std::string text, std::vector<double> values);

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::shared_ptr<const ContentStore> store_;
    MockRenderSpec spec_;
    std::mutex mutex_;
    std::map<std::string, std::vector<double>> text_fixtures_;
    std::atomic<std::size_t> calls_{0};
};

} // namespace catsynth
