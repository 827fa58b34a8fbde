// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/templates.hpp"

#include <set>

#include "catsynth/error.hpp"

namespace catsynth {

namespace embedded {
// Generated from core/templates/*.txt: one `k_<file stem>` string_view per file.
#include "catsynth_templates.inc"
} // namespace embedded

std::string_view template_name(TemplateId id) noexcept {
    switch (id) {
    case TemplateId::ImageDescription: return "image_description";
    case TemplateId::BatchSummarization: return "batch_summarization";
    case TemplateId::SelfRefinement: return "self_refinement";
    case TemplateId::EasyNegativeTree: return "easy_negative_tree";
    case TemplateId::TreeAdd: return "tree_add";
    case TemplateId::TreeRemove: return "tree_remove";
    case TemplateId::TreeModify: return "tree_modify";
    case TemplateId::ImagePromptGeneration: return "image_prompt_generation";
    case TemplateId::CaptionVote: return "caption_vote";
    case TemplateId::InstructionPairsPositive: return "instruction_pairs_positive";
    case TemplateId::InstructionPairsNegative: return "instruction_pairs_negative";
    }
    return "";
}

std::string_view template_text(TemplateId id) noexcept {
    switch (id) {
    case TemplateId::ImageDescription: return embedded::k_image_description;
    case TemplateId::BatchSummarization: return embedded::k_batch_summarization;
    case TemplateId::SelfRefinement: return embedded::k_self_refinement;
    case TemplateId::EasyNegativeTree: return embedded::k_easy_negative_tree;
    case TemplateId::TreeAdd: return embedded::k_tree_add;
    case TemplateId::TreeRemove: return embedded::k_tree_remove;
    case TemplateId::TreeModify: return embedded::k_tree_modify;
    case TemplateId::ImagePromptGeneration: return embedded::k_image_prompt_generation;
    case TemplateId::CaptionVote: return embedded::k_caption_vote;
    case TemplateId::InstructionPairsPositive: return embedded::k_instruction_pairs_positive;
    case TemplateId::InstructionPairsNegative: return embedded::k_instruction_pairs_negative;
    }
    return "";
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(text.size());
    std::set<std::string> used;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            out.push_back('{');
            ++i;
        } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            out.push_back('}');
            ++i;
        } else if (c == '{') {
            const auto close = text.find('}', i);
            if (close == std::string_view::npos) {
                fail(ErrorCode::Precondition, "unterminated placeholder in template");
            }
            const std::string name(text.substr(i + 1, close - i - 1));
            auto it = vars.find(name);
            if (it == vars.end()) {
                fail(ErrorCode::Precondition, "no value for template placeholder {" + name + "}");
            }
            out += it->second;
            used.insert(name);
            i = close;
        } else {
            out.push_back(c);
        }
    }
    for (const auto& [name, value] : vars) {
        if (!used.count(name)) {
            fail(ErrorCode::Precondition, "template has no placeholder {" + name + "}");
        }
    }
    return out;
}

std::string render_template(TemplateId id, const std::map<std::string, std::string>& vars) {
    return render_template(template_text(id), vars);
}

} // namespace catsynth
