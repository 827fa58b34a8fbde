// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "catsynth/backends.hpp"
#include "catsynth/concept_tree.hpp"

namespace catsynth {

enum class SampleRole { Positive, EasyNegative, HardNegative };

std::string_view to_string(SampleRole role) noexcept;
std::optional<SampleRole> sample_role_from_string(std::string_view s) noexcept;

/// One attribute per picked dimension, kept in the tree's dimension order.
struct AttributeAssignment {
    std::string tree_ref;
    std::vector<std::pair<std::string, std::string>> picks;

    bool operator==(const AttributeAssignment&) const = default;
    auto operator<=>(const AttributeAssignment&) const = default;
};

struct PromptSpec {
    std::string text;
    SampleRole role = SampleRole::Positive;
    AttributeAssignment assignment;
    std::string source_tree;
    std::uint64_t seed = 0;

    bool operator==(const PromptSpec&) const = default;
};

/// Checks that every pick names an existing dimension (at most once) and one
/// of that dimension's attributes.
bool is_valid_assignment(const ConceptTree& tree, const AttributeAssignment& a);

/// min(limit, product of attribute counts) distinct full assignments, drawn
/// without replacement and deterministic per seed. Spaces up to 10^6 use a
/// seeded partial shuffle of the index space; larger ones use rejection
/// sampling against a seen-set.
std::vector<AttributeAssignment> enumerate_assignments(const ConceptTree& tree, std::size_t limit,
                                                       std::uint64_t seed);

inline constexpr std::size_t kShuffleSpaceLimit = 1'000'000;

/// "a photo of {attr1}, {attr2}, ..., {root}"
std::string render_prompt(const AttributeAssignment& assignment, std::string_view root);

/// n specs "a photo of {subject_token} {root}" with seeds 0..n-1.
std::vector<PromptSpec> positive_prompts(const ConceptTree& tree, std::string_view subject_token, std::size_t n);

/// Easy negatives need a DerivedEasyNegative tree, hard negatives a DerivedEdit tree.
std::vector<PromptSpec> negative_prompts(const ConceptTree& tree, SampleRole role, std::size_t limit,
                                         std::uint64_t seed);

/// Joint prompts "a photo of {a..., class1} and {a..., class2}" for a forest
/// under DisjointAttributes.
std::vector<PromptSpec> forest_prompts(const ConceptForest& forest, SampleRole role, std::size_t limit,
                                       std::uint64_t seed);

std::vector<ChatMessage> prompt_generation_request(const ConceptTree& tree);

struct LlmPromptResult {
    std::vector<PromptSpec> prompts;
    std::size_t duplicates_dropped = 0;
    // set when fewer than the requested count survived
    bool short_count = false;
};

/// Prompts written by the model, one per line. Blank lines and list markers
/// are stripped and exact duplicates dropped.
LlmPromptResult llm_prompts(const ConceptTree& tree, SampleRole role, ChatBackend& llm, std::size_t n = 100);

} // namespace catsynth
