// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace catsynth {

enum class Provenance { UserBuilt, LlmBuilt, DerivedEasyNegative, DerivedEdit };

std::string_view to_string(Provenance p) noexcept;
std::optional<Provenance> provenance_from_string(std::string_view s) noexcept;

/// One axis of visual variation, e.g. "behavior" -> {"sitting", "lying"}.
struct Dimension {
    std::string name;
    std::vector<std::string> attributes;

    bool operator==(const Dimension&) const = default;
};

/// Three-layer concept description: root class -> dimensions -> attributes.
///
/// Trees are plain values. Every operation in this header returns a new tree
/// and leaves its arguments untouched.
struct ConceptTree {
    std::string concept_id;
    std::string root;
    std::vector<Dimension> dimensions;
    Provenance provenance = Provenance::UserBuilt;
    // Number of edits folded into this tree by apply_edit_sequence.
    std::size_t edit_count = 0;

    bool operator==(const ConceptTree&) const = default;

    const Dimension* find(std::string_view dimension_name) const;
};

/// Same root and same dimension list, ignoring id and provenance metadata.
bool structurally_equal(const ConceptTree& a, const ConceptTree& b);

/// Dimension identity key: trimmed, ASCII lower-cased.
std::string dimension_key(std::string_view name);

std::string trim(std::string_view s);

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;
};

ValidationReport validate(const ConceptTree& tree);

/// Throws ValidationFailed listing all violations when the tree is invalid.
void ensure_valid(const ConceptTree& tree);

struct AddDimension {
    Dimension added;
    bool operator==(const AddDimension&) const = default;
};
struct RemoveDimension {
    std::string name;
    bool operator==(const RemoveDimension&) const = default;
};
struct ModifyDimension {
    std::string old_name;
    Dimension replacement;
    bool operator==(const ModifyDimension&) const = default;
};

enum class EditKind { Add, Remove, Modify };

std::string_view to_string(EditKind kind) noexcept;
std::optional<EditKind> edit_kind_from_string(std::string_view s) noexcept;

struct TreeEdit {
    std::variant<AddDimension, RemoveDimension, ModifyDimension> payload;

    EditKind kind() const noexcept;
    bool operator==(const TreeEdit&) const = default;

    static TreeEdit add(Dimension d) { return {AddDimension{std::move(d)}}; }
    static TreeEdit remove(std::string name) { return {RemoveDimension{std::move(name)}}; }
    static TreeEdit modify(std::string old_name, Dimension d) {
        return {ModifyDimension{std::move(old_name), std::move(d)}};
    }
};

/// Add: D ∪ {new}; Remove: D \ {name}; Modify: (D \ {old}) ∪ {new}, in place of
/// the old dimension. Result provenance is DerivedEdit.
ConceptTree apply_edit(const ConceptTree& tree, const TreeEdit& edit);

/// Left fold of apply_edit. Errors carry the index of the failing edit.
ConceptTree apply_edit_sequence(const ConceptTree& tree, const std::vector<TreeEdit>& edits);

enum class OverlapPolicy { DisjointAttributes, Unconstrained };

std::string_view to_string(OverlapPolicy p) noexcept;
std::optional<OverlapPolicy> overlap_policy_from_string(std::string_view s) noexcept;

struct ConceptForest {
    std::string scene_id;
    std::vector<ConceptTree> trees;
    OverlapPolicy overlap_policy = OverlapPolicy::DisjointAttributes;

    bool operator==(const ConceptForest&) const = default;
};

struct AttributeRemoval {
    std::string concept_id;
    std::string dimension;
    std::string attribute;
    // concept that kept the attribute
    std::string kept_by;

    bool operator==(const AttributeRemoval&) const = default;
};

struct MergeResult {
    ConceptForest forest;
    std::vector<AttributeRemoval> removals;
};

/// Under DisjointAttributes the first tree (input order) keeps a contested
/// attribute and later trees drop it.
MergeResult merge(const std::vector<ConceptTree>& trees, OverlapPolicy policy,
                  std::string scene_id = "scene");

/// Canonical JSON documents: sorted keys, two-space indent, lists in given order.
std::string serialize(const ConceptTree& tree);
std::string serialize(const ConceptForest& forest);

ConceptTree deserialize_tree(std::string_view document);
ConceptForest deserialize_forest(std::string_view document);

/// True when the document looks like a forest (has a "trees" member).
bool is_forest_document(std::string_view document);

/// Compact body used inside LLM prompts: {"root", "dimensions"} only.
std::string tree_body_json(const ConceptTree& tree);

/// Product of attribute counts, saturating at SIZE_MAX.
std::size_t assignment_space_size(const ConceptTree& tree);

} // namespace catsynth
