// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catsynth/backends.hpp"
#include "catsynth/concept_tree.hpp"

namespace catsynth {

struct Caption {
    ImageRef image;
    std::string text;
    std::string class_name;
};

struct CaptionSet {
    std::string concept_id;
    std::vector<Caption> captions;
    // Majority class over captions; ties go to the lexicographically smallest.
    std::string class_name;
};

enum class FeedbackKind { Hallucination, Redundant, Missing };

std::string_view to_string(FeedbackKind kind) noexcept;

struct RefineFeedback {
    FeedbackKind kind = FeedbackKind::Hallucination;
    // empty for Hallucination, exactly one keyword otherwise
    std::vector<std::string> keywords;
    // Tree the model returned next to its answer, if any. Only used to locate
    // where a keyword belongs; edits are always applied locally.
    std::optional<ConceptTree> proposed;
};

struct VoteResult {
    std::size_t caption_index = 0;
    // one map per round: dimension name -> attribute ("" when the model gave none)
    std::vector<std::map<std::string, std::string>> rounds;
    // dimension name -> attribute that reached the quorum
    std::map<std::string, std::string> winners;
    // dimensions whose votes were spread over two or more attributes
    std::vector<std::string> split_dimensions;
    bool consensus = false;
};

struct BuilderConfig {
    int vote_rounds = 3;
    int vote_quorum = 2;
    int refine_max_iters = 5;
    // identical re-sends after an unparseable image description
    int description_retries = 2;
    std::size_t threads = 4;
};

// Requests. Exposed so fixtures and tests can address exactly what the
// builder sends.
std::vector<ChatMessage> description_request(const ImageRef& image);
std::vector<ChatMessage> summarize_request(const CaptionSet& captions);
std::vector<ChatMessage> vote_request(const ConceptTree& tree, std::string_view caption, int round);
std::vector<ChatMessage> feedback_request(const ConceptTree& tree, std::string_view caption);
std::vector<ChatMessage> easy_negative_request(const ConceptTree& tree);
std::vector<ChatMessage> edit_request(const ConceptTree& tree, EditKind kind, int num);
/// Same conversation with the format reminder appended to the last message.
std::vector<ChatMessage> with_reminder(std::vector<ChatMessage> messages);

// Reply parsing.
std::vector<std::string> fenced_blocks(std::string_view reply);
/// Root and dimensions from a reply; throws MalformedResponse.
ConceptTree parse_tree_reply(std::string_view reply);
/// "class: <name>" line plus description; throws MalformedResponse.
Caption parse_description(std::string_view reply);
RefineFeedback parse_feedback(std::string_view reply);

CaptionSet describe_images(std::span<const ImageRef> images, ChatBackend& vlm, const BuilderConfig& config = {},
                           std::string concept_id = "concept");

ConceptTree summarize_batch(const CaptionSet& captions, ChatBackend& llm);

VoteResult classify_caption(const ConceptTree& tree, std::string_view caption, ChatBackend& llm, int rounds,
                            int quorum);

struct RefineOutcome {
    ConceptTree tree;
    bool converged = false;
    int iterations = 0;
    std::vector<RefineFeedback> feedback;
    std::vector<TreeEdit> edits;
};

/// Vote -> feedback -> local edit loop. Running out of iterations is
/// reported through `converged == false`, not an exception.
RefineOutcome refine(const ConceptTree& tree, const CaptionSet& captions, ChatBackend& llm,
                     const BuilderConfig& config = {});

/// Applies one piece of feedback for one caption; exposed for tests.
std::vector<TreeEdit> edits_for_feedback(const ConceptTree& tree, const RefineFeedback& feedback,
                                         const VoteResult& vote);

struct BuildResult {
    ConceptTree tree;
    CaptionSet captions;
    RefineOutcome refine;
    std::vector<std::string> stages;
};

BuildResult build_tree(std::span<const ImageRef> images, ChatBackend& vlm, ChatBackend& llm,
                       const BuilderConfig& config = {}, std::string concept_id = "concept");

ConceptTree derive_easy_negative_tree(const ConceptTree& tree, ChatBackend& llm);

struct TreeDiff {
    std::vector<std::string> removed;
    std::vector<Dimension> added;
    // dimensions present in both whose attribute lists differ
    std::vector<std::string> changed;
};

TreeDiff diff_dimensions(const ConceptTree& before, const ConceptTree& after);

struct EditOutcome {
    ConceptTree tree;
    std::vector<TreeEdit> edits;
};

EditOutcome edit_tree_llm(const ConceptTree& tree, EditKind kind, int num, ChatBackend& llm);

} // namespace catsynth
