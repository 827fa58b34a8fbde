// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/mock_backends.hpp"

#include <algorithm>

#include "catsynth/concept_tree.hpp"
#include "catsynth/digest.hpp"
#include "catsynth/random.hpp"
#include "json_util.hpp"

namespace catsynth {

using json_util::Json;

namespace {

Json messages_to_json(std::span<const ChatMessage> messages) {
    Json arr = Json::array();
    for (const auto& m : messages) {
        Json images = Json::array();
        for (const auto& img : m.images) {
            images.push_back(img.address);
        }
        arr.push_back(Json{{"images", std::move(images)}, {"role", m.role}, {"text", m.text}});
    }
    return arr;
}

std::vector<ChatMessage> messages_from_json(const Json& arr) {
    if (!arr.is_array()) {
        throw SchemaError("messages", "expected a list");
    }
    std::vector<ChatMessage> out;
    for (const auto& m : arr) {
        json_util::expect_fields(m, {"role", "text"}, {"images"}, "messages[].");
        ChatMessage msg{json_util::get_string(m, "role", "messages[]."), json_util::get_string(m, "text", "messages[]."),
                        {}};
        if (m.contains("images")) {
            for (const auto& a : m.at("images")) {
                msg.images.push_back(ImageRef{a.get<std::string>(), 0, 0, "rgb8"});
            }
        }
        out.push_back(std::move(msg));
    }
    return out;
}

} // namespace

std::string message_digest(std::span<const ChatMessage> messages) {
    return sha256_hex(json_util::line(messages_to_json(messages)));
}

void MockFixtures::add(std::span<const ChatMessage> messages, std::vector<std::string> sequence) {
    add_key(message_digest(messages), std::move(sequence));
}

void MockFixtures::add_key(std::string key, std::vector<std::string> sequence) {
    require(!sequence.empty(), "a fixture needs at least one reply");
    replies[std::move(key)] = std::move(sequence);
}

void MockFixtures::merge(const MockFixtures& other) {
    for (const auto& [k, v] : other.replies) {
        replies[k] = v;
    }
}

MockFixtures MockFixtures::from_json(std::string_view document) {
    Json j = json_util::parse(document);
    json_util::expect_fields(j, {"fixtures"}, {}, "");
    MockFixtures out;
    for (const auto& f : j.at("fixtures")) {
        json_util::expect_fields(f, {"replies"}, {"key", "messages"}, "fixtures[].");
        std::vector<std::string> seq = f.at("replies").get<std::vector<std::string>>();
        if (f.contains("key")) {
            out.add_key(f.at("key").get<std::string>(), std::move(seq));
        } else if (f.contains("messages")) {
            out.add(messages_from_json(f.at("messages")), std::move(seq));
        } else {
            throw SchemaError("fixtures[].key", "need either key or messages");
        }
    }
    return out;
}

MockFixtures MockFixtures::load(const std::filesystem::path& path) {
    return from_json(read_file(path));
}

std::string MockFixtures::to_json() const {
    Json arr = Json::array();
    for (const auto& [k, v] : replies) {
        arr.push_back(Json{{"key", k}, {"replies", v}});
    }
    return Json{{"fixtures", std::move(arr)}}.dump(2) + "\n";
}

void MockFixtures::save(const std::filesystem::path& path) const {
    write_file_atomic(path, to_json());
}

BackendConfig MockChat::default_config() {
    BackendConfig c;
    c.endpoint = "mock://chat";
    c.model = "mock";
    c.backoff_seconds = 0.0;
    return c;
}

MockChat::MockChat(MockFixtures fixtures, BackendConfig config)
    : fixtures_(std::move(fixtures)),
      config_(std::move(config)),
      retry_(config_.max_retries, config_.backoff_seconds),
      limiter_(config_.max_in_flight) {
    config_.validate();
}

std::string MockChat::answer(const std::string& key) {
    ++calls_;
    if (pending_faults_.load() > 0 && pending_faults_.fetch_sub(1) > 0) {
        throw BackendError(BackendError::Kind::Transport, "injected transient fault");
    }
    std::lock_guard lock(mutex_);
    auto it = fixtures_.replies.find(key);
    if (it == fixtures_.replies.end()) {
        fail(ErrorCode::MockMissingFixture, "no mock reply for message digest " + key);
    }
    std::size_t& pos = cursor_[key];
    const std::string& reply = it->second[std::min(pos, it->second.size() - 1)];
    ++pos;
    return reply;
}

std::string MockChat::chat(std::span<const ChatMessage> messages) {
    require(!messages.empty(), "chat needs at least one message");
    const std::string key = message_digest(messages);
    return limiter_.run([&] { return retry_.run([&] { return answer(key); }); });
}

namespace {

struct PromptParts {
    std::string context;
    std::string subject;
    std::string class_word;
};

PromptParts split_prompt(std::string_view prompt) {
    constexpr std::string_view kPrefix = "a photo of ";
    std::string_view body = prompt;
    if (body.substr(0, kPrefix.size()) == kPrefix) {
        body.remove_prefix(kPrefix.size());
    }
    PromptParts parts;
    const auto last_sep = body.rfind(", ");
    if (last_sep == std::string_view::npos) {
        parts.subject = trim(body);
    } else {
        parts.context = trim(body.substr(0, last_sep));
        parts.subject = trim(body.substr(last_sep + 2));
    }
    const auto space = parts.subject.rfind(' ');
    parts.class_word = space == std::string::npos ? parts.subject : parts.subject.substr(space + 1);
    return parts;
}

struct Rgb {
    std::uint8_t r, g, b;
};

enum class Tone { Vivid, Muted };

// Vivid colors are uniformly dark or uniformly bright so they dominate a
// grayscale embedding; muted ones stay near mid-gray.
Rgb color_for(std::uint64_t base, std::uint64_t index, Tone tone) {
    Rng rng(mix_seed(base ^ mix_seed(index)));
    std::uint64_t lo = 96;
    std::uint64_t width = 65;
    if (tone == Tone::Vivid) {
        width = 61;
        lo = rng.below(2) == 0 ? 0 : 195;
    }
    auto channel = [&] { return static_cast<std::uint8_t>(lo + rng.below(width)); };
    const auto r = channel();
    const auto g = channel();
    return {r, g, channel()};
}

void fill(Image& img, int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            auto* p = img.at(x, y);
            p[0] = c.r;
            p[1] = c.g;
            p[2] = c.b;
        }
    }
}

} // namespace

Image render_mock_image(std::string_view prompt, GenerationMode mode, std::optional<std::uint64_t> seed,
                        const MockRenderSpec& spec) {
    require(!prompt.empty(), "prompt must be non-empty");
    require(spec.width >= spec.grid && spec.height >= spec.grid && spec.grid >= 4, "render grid too fine");
    const PromptParts parts = split_prompt(prompt);
    const std::uint64_t bg_key = digest64("bg|" + parts.context);
    const std::uint64_t class_key = digest64("subject|" + parts.class_word);
    const std::uint64_t identity_key = digest64("identity|" + parts.subject);

    Image img(spec.width, spec.height);
    const int g = spec.grid;
    auto edge_x = [&](int i) { return i * spec.width / g; };
    auto edge_y = [&](int i) { return i * spec.height / g; };
    for (int cy = 0; cy < g; ++cy) {
        for (int cx = 0; cx < g; ++cx) {
            const int x0 = edge_x(cx), x1 = edge_x(cx + 1);
            const int y0 = edge_y(cy), y1 = edge_y(cy + 1);
            const bool subject = cx >= g / 4 && cx < 3 * g / 4 && cy >= g / 4 && cy < 3 * g / 4;
            const auto cell = static_cast<std::uint64_t>(cy * g + cx);
            if (!subject) {
                fill(img, x0, y0, x1, y1, color_for(bg_key, cell, Tone::Muted));
                continue;
            }
            const bool identity = mode == GenerationMode::FinetunedSubject && (cx + cy) % 2 == 0;
            fill(img, x0, y0, x1, y1, color_for(identity ? identity_key : class_key, cell, Tone::Vivid));
        }
    }

    if (seed && spec.noise > 0) {
        Rng rng(mix_seed(*seed) ^ digest64(prompt));
        const auto span = static_cast<std::uint64_t>(2 * spec.noise + 1);
        for (auto& v : img.rgb) {
            const int noisy = static_cast<int>(v) + static_cast<int>(rng.below(span)) - spec.noise;
            v = static_cast<std::uint8_t>(std::clamp(noisy, 0, 255));
        }
    }
    return img;
}

MockImageGenerator::MockImageGenerator(std::shared_ptr<ContentStore> store, MockRenderSpec spec)
    : store_(std::move(store)), spec_(spec) {}

ImageRef MockImageGenerator::generate_image(std::string_view prompt, GenerationMode mode, std::uint64_t seed) {
    require(!prompt.empty(), "prompt must be non-empty");
    ++calls_;
    return store_->put(render_mock_image(prompt, mode, seed, spec_));
}

std::vector<double> pixel_flatten(const Image& image) {
    auto gray = downsample_gray(image, 16, 16);
    for (auto& v : gray) {
        v = v / 127.5 - 1.0;
    }
    return gray;
}

PixelFlattenEncoder::PixelFlattenEncoder(std::shared_ptr<const ContentStore> store, MockRenderSpec spec)
    : store_(std::move(store)), spec_(spec) {}

EmbeddingVector PixelFlattenEncoder::embed_image(const ImageRef& image) {
    ++calls_;
    return {pixel_flatten(store_->load(image)), kTag};
}

EmbeddingVector PixelFlattenEncoder::embed_text(std::string_view text) {
    require(!text.empty(), "text must be non-empty");
    ++calls_;
    {
        std::lock_guard lock(mutex_);
        if (auto it = text_fixtures_.find(std::string(text)); it != text_fixtures_.end()) {
            return {it->second, kTag};
        }
    }
    return {pixel_flatten(render_mock_image(text, GenerationMode::Base, std::nullopt, spec_)), kTag};
}

void PixelFlattenEncoder::set_text_vector(std::string text, std::vector<double> values) {
    require(values.size() == kDim, "mock text vectors must have 256 values");
    std::lock_guard lock(mutex_);
    text_fixtures_[std::move(text)] = std::move(values);
}

} // namespace catsynth
