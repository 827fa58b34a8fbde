// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/tree_builder.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include "catsynth/parallel.hpp"
#include "catsynth/templates.hpp"
#include "json_util.hpp"

namespace catsynth {

using json_util::Json;
using json_util::OrderedJson;

std::string_view to_string(FeedbackKind kind) noexcept {
    switch (kind) {
    case FeedbackKind::Hallucination: return "hallucination";
    case FeedbackKind::Redundant: return "redundant";
    case FeedbackKind::Missing: return "missing";
    }
    return "hallucination";
}

namespace {

std::vector<ChatMessage> conversation(std::string_view system_hint, std::string user_text,
                                      std::vector<ImageRef> images = {}) {
    return {ChatMessage{"system", std::string(system_hint), {}},
            ChatMessage{"user", std::move(user_text), std::move(images)}};
}

std::string captions_json(const CaptionSet& set) {
    Json arr = Json::array();
    for (const auto& c : set.captions) {
        arr.push_back(c.text);
    }
    return arr.dump();
}

std::string lower(std::string_view s) {
    return dimension_key(s);
}

// Balanced {...} spans outside fenced blocks, honoring JSON string escapes.
std::vector<std::string> brace_objects(std::string_view text) {
    std::vector<std::string> out;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"' && depth > 0) {
            in_string = true;
        } else if (c == '{') {
            if (depth++ == 0) {
                start = i;
            }
        } else if (c == '}' && depth > 0) {
            if (--depth == 0) {
                out.emplace_back(text.substr(start, i - start + 1));
            }
        }
    }
    return out;
}

std::optional<OrderedJson> try_parse(std::string_view text) {
    try {
        return json_util::parse_ordered(text);
    } catch (const Error&) {
        return std::nullopt;
    }
}

// Accepts {"root", "dimensions": [{"name", "attributes"}]} or
// {"root", "dimensions": {"<name>": [...]}}.
std::optional<ConceptTree> tree_from_reply_json(const OrderedJson& j) {
    if (!j.is_object() || !j.contains("root") || !j.contains("dimensions") || !j["root"].is_string()) {
        return std::nullopt;
    }
    ConceptTree tree;
    tree.root = trim(j["root"].get<std::string>());
    const auto& dims = j["dimensions"];
    auto read_attrs = [](const OrderedJson& a, Dimension& d) {
        if (!a.is_array()) {
            return false;
        }
        for (const auto& x : a) {
            if (!x.is_string()) {
                return false;
            }
            d.attributes.push_back(trim(x.get<std::string>()));
        }
        return true;
    };
    if (dims.is_array()) {
        for (const auto& d : dims) {
            if (!d.is_object() || !d.contains("name") || !d["name"].is_string() || !d.contains("attributes")) {
                return std::nullopt;
            }
            Dimension dim{trim(d["name"].get<std::string>()), {}};
            if (!read_attrs(d["attributes"], dim)) {
                return std::nullopt;
            }
            tree.dimensions.push_back(std::move(dim));
        }
    } else if (dims.is_object()) {
        for (const auto& [name, attrs] : dims.items()) {
            Dimension dim{trim(name), {}};
            if (!read_attrs(attrs, dim)) {
                return std::nullopt;
            }
            tree.dimensions.push_back(std::move(dim));
        }
    } else {
        return std::nullopt;
    }
    return tree;
}

std::optional<ConceptTree> find_tree(std::string_view reply) {
    for (const auto& block : fenced_blocks(reply)) {
        if (auto j = try_parse(block)) {
            if (auto t = tree_from_reply_json(*j)) {
                return t;
            }
        }
    }
    for (const auto& obj : brace_objects(reply)) {
        if (auto j = try_parse(obj)) {
            if (auto t = tree_from_reply_json(*j)) {
                return t;
            }
        }
    }
    return std::nullopt;
}

// Runs `attempt` on the reply to `request`; on MalformedResponse or
// ValidationFailed re-asks once with the format reminder.
template <typename Parse>
auto ask_with_reask(ChatBackend& llm, const std::vector<ChatMessage>& request, Parse&& attempt)
    -> decltype(attempt(std::string_view{})) {
    try {
        return attempt(llm.chat(request));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedResponse && e.code() != ErrorCode::ValidationFailed &&
            e.code() != ErrorCode::SameClassReturned && e.code() != ErrorCode::EditCountMismatch) {
            throw;
        }
    }
    return attempt(llm.chat(with_reminder(request)));
}

} // namespace

std::vector<ChatMessage> description_request(const ImageRef& image) {
    return conversation(format_hint::kDescription, render_template(TemplateId::ImageDescription, {}), {image});
}

std::vector<ChatMessage> summarize_request(const CaptionSet& captions) {
    return conversation(format_hint::kTree,
                        render_template(TemplateId::BatchSummarization,
                                        {{"tree_example", std::string(format_hint::kTreeExample)},
                                         {"class_name", captions.class_name},
                                         {"captions", captions_json(captions)}}));
}

std::vector<ChatMessage> vote_request(const ConceptTree& tree, std::string_view caption, int round) {
    return conversation(format_hint::kTree,
                        render_template(TemplateId::CaptionVote, {{"round", std::to_string(round)},
                                                                  {"caption", std::string(caption)},
                                                                  {"concept_tree", tree_body_json(tree)}}));
}

std::vector<ChatMessage> feedback_request(const ConceptTree& tree, std::string_view caption) {
    return conversation(format_hint::kFeedback,
                        render_template(TemplateId::SelfRefinement,
                                        {{"captions", std::string(caption)}, {"concept_tree", tree_body_json(tree)}}));
}

std::vector<ChatMessage> easy_negative_request(const ConceptTree& tree) {
    return conversation(format_hint::kTree,
                        render_template(TemplateId::EasyNegativeTree, {{"concept_tree", tree_body_json(tree)}}));
}

std::vector<ChatMessage> edit_request(const ConceptTree& tree, EditKind kind, int num) {
    const TemplateId id = kind == EditKind::Add      ? TemplateId::TreeAdd
                          : kind == EditKind::Remove ? TemplateId::TreeRemove
                                                     : TemplateId::TreeModify;
    return conversation(format_hint::kTree,
                        render_template(id, {{"num", std::to_string(num)}, {"concept_tree", tree_body_json(tree)}}));
}

std::vector<ChatMessage> with_reminder(std::vector<ChatMessage> messages) {
    messages.back().text += format_hint::kReminder;
    return messages;
}

std::vector<std::string> fenced_blocks(std::string_view reply) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto open = reply.find("```", pos);
        if (open == std::string_view::npos) {
            break;
        }
        const auto body_start = reply.find('\n', open);
        if (body_start == std::string_view::npos) {
            break;
        }
        const auto close = reply.find("```", body_start);
        if (close == std::string_view::npos) {
            break;
        }
        out.emplace_back(reply.substr(body_start + 1, close - body_start - 1));
        pos = close + 3;
    }
    return out;
}

ConceptTree parse_tree_reply(std::string_view reply) {
    auto tree = find_tree(reply);
    if (!tree) {
        fail(ErrorCode::MalformedResponse, "no concept tree found in reply");
    }
    return *tree;
}

Caption parse_description(std::string_view reply) {
    static const std::regex kClassLine(R"(^\s*\**\s*class(?:\s+name)?\s*\**\s*[:=]\s*(.+?)\s*$)",
                                       std::regex::icase);
    std::string text(reply);
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        auto line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) {
            line_end = text.size();
        }
        const std::string line = text.substr(line_start, line_end - line_start);
        std::smatch m;
        if (std::regex_match(line, m, kClassLine)) {
            Caption c;
            c.class_name = lower(m[1].str());
            std::string rest = trim(text.substr(0, line_start) + (line_end < text.size() ? text.substr(line_end + 1) : ""));
            c.text = rest.empty() ? trim(text) : rest;
            if (!c.class_name.empty()) {
                return c;
            }
        }
        line_start = line_end + 1;
    }
    fail(ErrorCode::MalformedResponse, "no class name in image description");
}

RefineFeedback parse_feedback(std::string_view reply) {
    // Feedback objects may sit in prose or inside a fence; the tree, if any, sits in a fence.
    std::vector<std::string> candidates = brace_objects(reply);
    for (const auto& block : fenced_blocks(reply)) {
        for (auto& obj : brace_objects(block)) {
            candidates.push_back(std::move(obj));
        }
    }
    for (const auto& text : candidates) {
        auto j = try_parse(text);
        if (!j || !j->is_object() || j->size() != 1) {
            continue;
        }
        const auto& [key, value] = *j->items().begin();
        RefineFeedback fb;
        if (key == "hallucination") {
            fb.kind = FeedbackKind::Hallucination;
        } else if (key == "redundant") {
            fb.kind = FeedbackKind::Redundant;
        } else if (key == "missing") {
            fb.kind = FeedbackKind::Missing;
        } else {
            continue;
        }
        if (!value.is_array()) {
            fail(ErrorCode::MalformedResponse, "feedback keywords must be a list");
        }
        for (const auto& k : value) {
            if (!k.is_string() || trim(k.get<std::string>()).empty()) {
                fail(ErrorCode::MalformedResponse, "feedback keywords must be non-empty strings");
            }
            fb.keywords.push_back(trim(k.get<std::string>()));
        }
        const std::size_t want = fb.kind == FeedbackKind::Hallucination ? 0 : 1;
        if (fb.keywords.size() != want) {
            fail(ErrorCode::MalformedResponse, std::string(to_string(fb.kind)) + " feedback needs " +
                                                   std::to_string(want) + " keyword(s), got " +
                                                   std::to_string(fb.keywords.size()));
        }
        fb.proposed = find_tree(reply);
        return fb;
    }
    fail(ErrorCode::MalformedResponse, "no hallucination/redundant/missing answer in reply");
}

CaptionSet describe_images(std::span<const ImageRef> images, ChatBackend& vlm, const BuilderConfig& config,
                           std::string concept_id) {
    require(!images.empty(), "describe_images needs at least one image");
    CaptionSet set;
    set.concept_id = std::move(concept_id);
    set.captions.resize(images.size());
    parallel_for(images.size(), config.threads, [&](std::size_t i) {
        const auto request = description_request(images[i]);
        for (int attempt = 0;; ++attempt) {
            try {
                Caption c = parse_description(vlm.chat(request));
                c.image = images[i];
                set.captions[i] = std::move(c);
                return;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::MalformedResponse || attempt >= config.description_retries) {
                    throw;
                }
            }
        }
    });

    std::map<std::string, int> votes;
    for (const auto& c : set.captions) {
        ++votes[c.class_name];
    }
    // std::map iterates in lexicographic order, so the first maximum wins ties.
    int best = 0;
    for (const auto& [name, count] : votes) {
        if (count > best) {
            best = count;
            set.class_name = name;
        }
    }
    return set;
}

ConceptTree summarize_batch(const CaptionSet& captions, ChatBackend& llm) {
    require(!captions.captions.empty(), "summarize_batch needs captions");
    require(!captions.class_name.empty(), "summarize_batch needs a class name");
    return ask_with_reask(llm, summarize_request(captions), [&](std::string_view reply) {
        ConceptTree tree = parse_tree_reply(reply);
        tree.concept_id = captions.concept_id;
        tree.root = captions.class_name;
        tree.provenance = Provenance::LlmBuilt;
        ensure_valid(tree);
        return tree;
    });
}

VoteResult classify_caption(const ConceptTree& tree, std::string_view caption, ChatBackend& llm, int rounds,
                            int quorum) {
    require(rounds >= 1, "vote rounds must be >= 1");
    require(quorum >= 1 && quorum <= rounds, "vote quorum must be in [1, rounds]");
    VoteResult result;
    for (int round = 1; round <= rounds; ++round) {
        const std::string reply = llm.chat(vote_request(tree, caption, round));
        std::optional<OrderedJson> parsed;
        for (const auto& block : fenced_blocks(reply)) {
            if ((parsed = try_parse(block))) {
                break;
            }
        }
        if (!parsed) {
            for (const auto& obj : brace_objects(reply)) {
                if ((parsed = try_parse(obj))) {
                    break;
                }
            }
        }
        std::map<std::string, std::string> picks;
        for (const auto& dim : tree.dimensions) {
            std::string chosen;
            if (parsed && parsed->is_object()) {
                for (const auto& [key, value] : parsed->items()) {
                    if (dimension_key(key) != dimension_key(dim.name) || !value.is_string()) {
                        continue;
                    }
                    const std::string v = lower(value.get<std::string>());
                    for (const auto& attr : dim.attributes) {
                        if (lower(attr) == v) {
                            chosen = attr;
                        }
                    }
                }
            }
            picks[dim.name] = chosen;
        }
        result.rounds.push_back(std::move(picks));
    }

    result.consensus = true;
    for (const auto& dim : tree.dimensions) {
        std::map<std::string, int> counts;
        for (const auto& round : result.rounds) {
            const auto& pick = round.at(dim.name);
            if (!pick.empty()) {
                ++counts[pick];
            }
        }
        if (counts.size() > 1) {
            result.split_dimensions.push_back(dim.name);
        }
        std::string winner;
        int best = 0;
        for (const auto& [attr, n] : counts) {
            if (n > best) {
                best = n;
                winner = attr;
            }
        }
        if (best >= quorum) {
            result.winners[dim.name] = winner;
        } else {
            result.consensus = false;
        }
    }
    return result;
}

std::vector<TreeEdit> edits_for_feedback(const ConceptTree& tree, const RefineFeedback& feedback,
                                         const VoteResult& vote) {
    if (feedback.kind == FeedbackKind::Hallucination) {
        return {};
    }
    const std::string& keyword = feedback.keywords.front();
    auto holds_keyword = [&](const Dimension& d) {
        return std::any_of(d.attributes.begin(), d.attributes.end(),
                           [&](const std::string& a) { return lower(a) == lower(keyword); });
    };
    // Where the model placed the keyword in the tree it sent back.
    const Dimension* proposed_home = nullptr;
    if (feedback.proposed) {
        for (const auto& d : feedback.proposed->dimensions) {
            if (holds_keyword(d)) {
                proposed_home = &d;
                break;
            }
        }
    }

    if (feedback.kind == FeedbackKind::Missing) {
        if (std::any_of(tree.dimensions.begin(), tree.dimensions.end(), holds_keyword)) {
            return {};
        }
        const std::string home = proposed_home ? proposed_home->name : std::string("other");
        if (const Dimension* existing = tree.find(home)) {
            Dimension grown = *existing;
            grown.attributes.push_back(keyword);
            return {TreeEdit::modify(existing->name, std::move(grown))};
        }
        return {TreeEdit::add(Dimension{home, {keyword}})};
    }

    // Redundant: the attributes a caption bounced between are the ones to fold.
    const Dimension* target = nullptr;
    std::set<std::string> merged;
    for (const auto& name : vote.split_dimensions) {
        if (const Dimension* d = tree.find(name)) {
            target = d;
            for (const auto& round : vote.rounds) {
                if (auto it = round.find(d->name); it != round.end() && !it->second.empty()) {
                    merged.insert(it->second);
                }
            }
            break;
        }
    }
    if (target == nullptr && proposed_home != nullptr) {
        if (const Dimension* d = tree.find(proposed_home->name)) {
            target = d;
            for (const auto& a : d->attributes) {
                if (std::find(proposed_home->attributes.begin(), proposed_home->attributes.end(), a) ==
                    proposed_home->attributes.end()) {
                    merged.insert(a);
                }
            }
        }
    }
    if (target == nullptr || merged.empty()) {
        return {};
    }
    Dimension folded{target->name, {}};
    bool placed = holds_keyword(*target) && !merged.count(keyword);
    for (const auto& a : target->attributes) {
        if (merged.count(a)) {
            if (!placed) {
                folded.attributes.push_back(keyword);
                placed = true;
            }
        } else {
            folded.attributes.push_back(a);
        }
    }
    if (folded == *target) {
        return {};
    }
    return {TreeEdit::modify(target->name, std::move(folded))};
}

RefineOutcome refine(const ConceptTree& tree, const CaptionSet& captions, ChatBackend& llm,
                     const BuilderConfig& config) {
    ensure_valid(tree);
    RefineOutcome out{tree, false, 0, {}, {}};
    for (int iter = 0; iter < config.refine_max_iters; ++iter) {
        std::vector<VoteResult> votes(captions.captions.size());
        parallel_for(votes.size(), config.threads, [&](std::size_t i) {
            votes[i] = classify_caption(out.tree, captions.captions[i].text, llm, config.vote_rounds,
                                        config.vote_quorum);
            votes[i].caption_index = i;
        });
        if (std::all_of(votes.begin(), votes.end(), [](const VoteResult& v) { return v.consensus; })) {
            out.converged = true;
            return out;
        }
        ++out.iterations;
        for (const auto& vote : votes) {
            if (vote.consensus) {
                continue;
            }
            const auto& caption = captions.captions[vote.caption_index].text;
            RefineFeedback fb = ask_with_reask(llm, feedback_request(out.tree, caption),
                                               [](std::string_view reply) { return parse_feedback(reply); });
            for (auto& edit : edits_for_feedback(out.tree, fb, vote)) {
                ConceptTree next = apply_edit(out.tree, edit);
                next.provenance = tree.provenance;
                next.edit_count = tree.edit_count;
                out.tree = std::move(next);
                out.edits.push_back(std::move(edit));
            }
            out.feedback.push_back(std::move(fb));
        }
    }
    ensure_valid(out.tree);
    return out;
}

BuildResult build_tree(std::span<const ImageRef> images, ChatBackend& vlm, ChatBackend& llm,
                       const BuilderConfig& config, std::string concept_id) {
    BuildResult result;
    result.captions = describe_images(images, vlm, config, std::move(concept_id));
    result.stages.push_back("describe_images");
    ConceptTree draft = summarize_batch(result.captions, llm);
    result.stages.push_back("summarize_batch");
    result.refine = refine(draft, result.captions, llm, config);
    result.stages.push_back(result.refine.converged ? "refine" : "refine(non-converged)");
    result.tree = result.refine.tree;
    return result;
}

ConceptTree derive_easy_negative_tree(const ConceptTree& tree, ChatBackend& llm) {
    ensure_valid(tree);
    return ask_with_reask(llm, easy_negative_request(tree), [&](std::string_view reply) {
        ConceptTree out = parse_tree_reply(reply);
        out.concept_id = tree.concept_id + "/easy";
        out.provenance = Provenance::DerivedEasyNegative;
        if (!validate(out).ok) {
            fail(ErrorCode::MalformedResponse, "easy-negative tree fails validation");
        }
        if (dimension_key(out.root) == dimension_key(tree.root)) {
            fail(ErrorCode::SameClassReturned, "model kept the class \"" + tree.root + "\"");
        }
        return out;
    });
}

TreeDiff diff_dimensions(const ConceptTree& before, const ConceptTree& after) {
    TreeDiff diff;
    for (const auto& d : before.dimensions) {
        const Dimension* match = after.find(d.name);
        if (match == nullptr) {
            diff.removed.push_back(d.name);
        } else if (match->attributes != d.attributes) {
            diff.changed.push_back(d.name);
        }
    }
    for (const auto& d : after.dimensions) {
        if (before.find(d.name) == nullptr) {
            diff.added.push_back(d);
        }
    }
    return diff;
}

EditOutcome edit_tree_llm(const ConceptTree& tree, EditKind kind, int num, ChatBackend& llm) {
    ensure_valid(tree);
    require(num >= 1, "edit count must be >= 1");
    if (kind == EditKind::Remove && static_cast<std::size_t>(num) >= tree.dimensions.size()) {
        fail(ErrorCode::EmptyTree, "cannot remove " + std::to_string(num) + " of " +
                                       std::to_string(tree.dimensions.size()) + " dimensions");
    }
    const auto n = static_cast<std::size_t>(num);
    return ask_with_reask(llm, edit_request(tree, kind, num), [&](std::string_view reply) {
        const ConceptTree proposed = parse_tree_reply(reply);
        if (!validate(ConceptTree{"", tree.root, proposed.dimensions, Provenance::DerivedEdit, 0}).ok) {
            fail(ErrorCode::MalformedResponse, "edited tree fails validation");
        }
        const TreeDiff diff = diff_dimensions(tree, proposed);
        std::vector<TreeEdit> edits;
        const bool counts_ok = (kind == EditKind::Add && diff.added.size() == n && diff.removed.empty()) ||
                               (kind == EditKind::Remove && diff.removed.size() == n && diff.added.empty()) ||
                               (kind == EditKind::Modify && diff.removed.size() == n && diff.added.size() == n);
        if (!counts_ok) {
            fail(ErrorCode::EditCountMismatch,
                 "asked to " + std::string(to_string(kind)) + " " + std::to_string(num) + " dimension(s); reply added " +
                     std::to_string(diff.added.size()) + " and removed " + std::to_string(diff.removed.size()));
        }
        for (std::size_t i = 0; i < n; ++i) {
            switch (kind) {
            case EditKind::Add: edits.push_back(TreeEdit::add(diff.added[i])); break;
            case EditKind::Remove: edits.push_back(TreeEdit::remove(diff.removed[i])); break;
            case EditKind::Modify: edits.push_back(TreeEdit::modify(diff.removed[i], diff.added[i])); break;
            }
        }
        EditOutcome out{apply_edit_sequence(tree, edits), std::move(edits)};
        out.tree.concept_id = tree.concept_id + "/" + std::string(to_string(kind)) + std::to_string(num);
        return out;
    });
}

} // namespace catsynth
