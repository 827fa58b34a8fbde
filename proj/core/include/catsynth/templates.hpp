// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>

namespace catsynth {

/// Prompt templates shipped in core/templates/ and compiled into the library.
enum class TemplateId {
    ImageDescription,
    BatchSummarization,
    SelfRefinement,
    EasyNegativeTree,
    TreeAdd,
    TreeRemove,
    TreeModify,
    ImagePromptGeneration,
    CaptionVote,
    InstructionPairsPositive,
    InstructionPairsNegative,
};

std::string_view template_name(TemplateId id) noexcept;
std::string_view template_text(TemplateId id) noexcept;

/// Substitutes `{name}` placeholders; `{{` and `}}` produce literal braces.
/// Unknown placeholders and unused variables are both errors, so a template
/// and its call site cannot drift apart silently.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars);
std::string render_template(TemplateId id, const std::map<std::string, std::string>& vars);

namespace format_hint {

/// System-message instructions that pin down reply structure. They travel
/// beside the templates, never inside them.
inline constexpr std::string_view kDescription =
    "Begin your reply with one line of the form \"class: <class name>\", then give the description.";
inline constexpr std::string_view kTree =
    "Return the concept tree inside a fenced ```json block shaped like "
    "{\"root\": \"<class name>\", \"dimensions\": [{\"name\": \"<dimension>\", \"attributes\": [\"<attribute>\"]}]}.";
inline constexpr std::string_view kFeedback =
    "Give exactly one answer-format object in curly braces. If you change the tree, also return the full "
    "updated concept tree inside a fenced ```json block.";
inline constexpr std::string_view kPromptLines = "Write one prompt per line with no numbering.";
inline constexpr std::string_view kReminder =
    "\n\nFormat reminder: put the complete answer inside a single fenced ```json block.";

/// Value substituted for {tree_example}.
inline constexpr std::string_view kTreeExample =
    "```json\n{\"root\": \"<class name>\", \"dimensions\": [{\"name\": \"<dimension 1>\", \"attributes\": "
    "[\"<attribute 1>\", \"<attribute 2>\"]}, {\"name\": \"<dimension 2>\", \"attributes\": [\"<attribute 1>\"]}]}\n```";

} // namespace format_hint

} // namespace catsynth
