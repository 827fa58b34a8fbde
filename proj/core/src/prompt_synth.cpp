// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/prompt_synth.hpp"

#include <algorithm>
#include <numeric>
#include <regex>
#include <set>
#include <unordered_set>

#include "catsynth/error.hpp"
#include "catsynth/random.hpp"
#include "catsynth/templates.hpp"

namespace catsynth {

std::string_view to_string(SampleRole role) noexcept {
    switch (role) {
    case SampleRole::Positive: return "positive";
    case SampleRole::EasyNegative: return "easy_negative";
    case SampleRole::HardNegative: return "hard_negative";
    }
    return "positive";
}

std::optional<SampleRole> sample_role_from_string(std::string_view s) noexcept {
    for (auto r : {SampleRole::Positive, SampleRole::EasyNegative, SampleRole::HardNegative}) {
        if (to_string(r) == s) {
            return r;
        }
    }
    if (s == "easy") {
        return SampleRole::EasyNegative;
    }
    if (s == "hard") {
        return SampleRole::HardNegative;
    }
    return std::nullopt;
}

bool is_valid_assignment(const ConceptTree& tree, const AttributeAssignment& a) {
    std::set<std::string> seen;
    for (const auto& [dim, attr] : a.picks) {
        const Dimension* d = tree.find(dim);
        if (d == nullptr || !seen.insert(dimension_key(dim)).second) {
            return false;
        }
        if (std::find(d->attributes.begin(), d->attributes.end(), attr) == d->attributes.end()) {
            return false;
        }
    }
    return true;
}

namespace {

/// Draws distinct mixed-radix index vectors without replacement.
class IndexSampler {
public:
    IndexSampler(std::vector<std::size_t> radices, std::uint64_t seed)
        : radices_(std::move(radices)), rng_(seed) {
        space_ = 1;
        for (auto r : radices_) {
            if (r == 0) {
                space_ = 0;
                break;
            }
            if (space_ > SIZE_MAX / r) {
                space_ = SIZE_MAX;
                break;
            }
            space_ *= r;
        }
        if (space_ <= kShuffleSpaceLimit) {
            order_.resize(space_);
            std::iota(order_.begin(), order_.end(), std::uint32_t{0});
        }
    }

    std::size_t space() const noexcept { return space_; }

    std::optional<std::vector<std::size_t>> next() {
        if (space_ <= kShuffleSpaceLimit) {
            if (drawn_ >= space_) {
                return std::nullopt;
            }
            // one step of a lazy Fisher-Yates shuffle
            const std::size_t j = drawn_ + rng_.below(space_ - drawn_);
            std::swap(order_[drawn_], order_[j]);
            return decode(order_[drawn_++]);
        }
        for (;;) {
            std::vector<std::size_t> digits(radices_.size());
            for (std::size_t i = 0; i < radices_.size(); ++i) {
                digits[i] = rng_.below(radices_[i]);
            }
            if (seen_.insert(digits).second) {
                ++drawn_;
                return digits;
            }
        }
    }

private:
    std::vector<std::size_t> decode(std::size_t index) const {
        std::vector<std::size_t> digits(radices_.size());
        for (std::size_t i = radices_.size(); i-- > 0;) {
            digits[i] = index % radices_[i];
            index /= radices_[i];
        }
        return digits;
    }

    std::vector<std::size_t> radices_;
    Rng rng_;
    std::size_t space_ = 0;
    std::size_t drawn_ = 0;
    std::vector<std::uint32_t> order_;
    std::set<std::vector<std::size_t>> seen_;
};

std::vector<std::size_t> radices_of(const ConceptTree& tree) {
    std::vector<std::size_t> r;
    for (const auto& d : tree.dimensions) {
        r.push_back(d.attributes.size());
    }
    return r;
}

AttributeAssignment assignment_from(const ConceptTree& tree, std::span<const std::size_t> digits,
                                    std::string_view name_prefix = {}) {
    AttributeAssignment a;
    a.tree_ref = tree.concept_id;
    for (std::size_t i = 0; i < tree.dimensions.size(); ++i) {
        const auto& d = tree.dimensions[i];
        a.picks.emplace_back(std::string(name_prefix) + d.name, d.attributes[digits[i]]);
    }
    return a;
}

std::string prompt_body(const AttributeAssignment& assignment, std::string_view root) {
    std::string body;
    for (const auto& [dim, attr] : assignment.picks) {
        body += attr;
        body += ", ";
    }
    body += root;
    return body;
}

void check_role(const ConceptTree& tree, SampleRole role) {
    if (role == SampleRole::EasyNegative && tree.provenance != Provenance::DerivedEasyNegative) {
        fail(ErrorCode::ProvenanceMismatch, "easy-negative prompts need a derived_easy_negative tree, \"" +
                                                tree.concept_id + "\" is " + std::string(to_string(tree.provenance)));
    }
    if (role == SampleRole::HardNegative && tree.provenance != Provenance::DerivedEdit) {
        fail(ErrorCode::ProvenanceMismatch, "hard-negative prompts need a derived_edit tree, \"" + tree.concept_id +
                                                "\" is " + std::string(to_string(tree.provenance)));
    }
}

} // namespace

std::vector<AttributeAssignment> enumerate_assignments(const ConceptTree& tree, std::size_t limit,
                                                       std::uint64_t seed) {
    require(limit >= 1, "assignment limit must be >= 1");
    IndexSampler sampler(radices_of(tree), seed);
    const std::size_t count = std::min(limit, sampler.space());
    std::vector<AttributeAssignment> out;
    out.reserve(count);
    while (out.size() < count) {
        auto digits = sampler.next();
        out.push_back(assignment_from(tree, *digits));
    }
    return out;
}

std::string render_prompt(const AttributeAssignment& assignment, std::string_view root) {
    return "a photo of " + prompt_body(assignment, root);
}

std::vector<PromptSpec> positive_prompts(const ConceptTree& tree, std::string_view subject_token, std::size_t n) {
    require(n >= 1, "positive prompt count must be >= 1");
    require(!trim(subject_token).empty(), "subject token must be non-empty");
    std::vector<PromptSpec> out;
    const std::string text = "a photo of " + trim(subject_token) + " " + tree.root;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(PromptSpec{text, SampleRole::Positive, AttributeAssignment{tree.concept_id, {}},
                                 tree.concept_id, i});
    }
    return out;
}

std::vector<PromptSpec> negative_prompts(const ConceptTree& tree, SampleRole role, std::size_t limit,
                                         std::uint64_t seed) {
    require(role != SampleRole::Positive, "negative_prompts takes a negative role");
    check_role(tree, role);
    std::vector<PromptSpec> out;
    std::uint64_t index = 0;
    for (auto& a : enumerate_assignments(tree, limit, seed)) {
        std::string text = render_prompt(a, tree.root);
        out.push_back(PromptSpec{std::move(text), role, std::move(a), tree.concept_id, index++});
    }
    return out;
}

std::vector<PromptSpec> forest_prompts(const ConceptForest& forest, SampleRole role, std::size_t limit,
                                       std::uint64_t seed) {
    require(limit >= 1, "prompt limit must be >= 1");
    if (forest.overlap_policy != OverlapPolicy::DisjointAttributes) {
        fail(ErrorCode::ProvenanceMismatch, "forest prompts need a disjoint_attributes forest");
    }
    std::vector<std::size_t> radices;
    for (const auto& t : forest.trees) {
        auto r = radices_of(t);
        radices.insert(radices.end(), r.begin(), r.end());
    }
    IndexSampler sampler(std::move(radices), seed);
    std::vector<PromptSpec> out;
    std::uint64_t index = 0;
    while (out.size() < limit) {
        auto digits = sampler.next();
        if (!digits) {
            break;
        }
        PromptSpec spec;
        spec.role = role;
        spec.source_tree = forest.scene_id;
        spec.assignment.tree_ref = forest.scene_id;
        spec.seed = index;
        std::unordered_set<std::string> used;
        bool repeated = false;
        std::size_t offset = 0;
        std::string text = "a photo of ";
        for (std::size_t t = 0; t < forest.trees.size(); ++t) {
            const auto& tree = forest.trees[t];
            auto part = assignment_from(tree, std::span(*digits).subspan(offset, tree.dimensions.size()),
                                        tree.concept_id + "/");
            offset += tree.dimensions.size();
            for (const auto& pick : part.picks) {
                repeated |= !used.insert(pick.second).second;
                spec.assignment.picks.push_back(pick);
            }
            if (t > 0) {
                text += " and ";
            }
            text += prompt_body(part, tree.root);
        }
        if (repeated) {
            continue;
        }
        spec.text = std::move(text);
        out.push_back(std::move(spec));
        ++index;
    }
    return out;
}

std::vector<ChatMessage> prompt_generation_request(const ConceptTree& tree) {
    return {ChatMessage{"system", std::string(format_hint::kPromptLines), {}},
            ChatMessage{"user",
                        render_template(TemplateId::ImagePromptGeneration,
                                        {{"category", tree.root}, {"concept_tree", tree_body_json(tree)}}),
                        {}}};
}

LlmPromptResult llm_prompts(const ConceptTree& tree, SampleRole role, ChatBackend& llm, std::size_t n) {
    if (role != SampleRole::Positive) {
        check_role(tree, role);
    }
    static const std::regex kMarker(R"(^(?:[-*•]|\d+[.)])\s+)");
    const std::string reply = llm.chat(prompt_generation_request(tree));
    LlmPromptResult result;
    std::unordered_set<std::string> seen;
    std::size_t pos = 0;
    while (pos <= reply.size()) {
        auto end = reply.find('\n', pos);
        if (end == std::string::npos) {
            end = reply.size();
        }
        std::string line = trim(std::string_view(reply).substr(pos, end - pos));
        pos = end + 1;
        line = std::regex_replace(line, kMarker, "");
        if (line.size() >= 2 && line.front() == '"' && line.back() == '"') {
            line = line.substr(1, line.size() - 2);
        }
        line = trim(line);
        if (line.empty() || line.rfind("```", 0) == 0) {
            continue;
        }
        if (!seen.insert(line).second) {
            ++result.duplicates_dropped;
            continue;
        }
        const auto index = static_cast<std::uint64_t>(result.prompts.size());
        result.prompts.push_back(
            PromptSpec{std::move(line), role, AttributeAssignment{tree.concept_id, {}}, tree.concept_id, index});
    }
    if (result.prompts.empty()) {
        fail(ErrorCode::MalformedResponse, "no prompts in reply");
    }
    result.short_count = result.prompts.size() < n;
    return result;
}

} // namespace catsynth
