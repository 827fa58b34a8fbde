// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/concept_tree.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "catsynth/error.hpp"
#include "json_util.hpp"

namespace catsynth {

std::string_view to_string(Provenance p) noexcept {
    switch (p) {
    case Provenance::UserBuilt: return "user_built";
    case Provenance::LlmBuilt: return "llm_built";
    case Provenance::DerivedEasyNegative: return "derived_easy_negative";
    case Provenance::DerivedEdit: return "derived_edit";
    }
    return "user_built";
}

std::optional<Provenance> provenance_from_string(std::string_view s) noexcept {
    for (auto p : {Provenance::UserBuilt, Provenance::LlmBuilt, Provenance::DerivedEasyNegative,
                   Provenance::DerivedEdit}) {
        if (to_string(p) == s) {
            return p;
        }
    }
    return std::nullopt;
}

std::string_view to_string(EditKind kind) noexcept {
    switch (kind) {
    case EditKind::Add: return "add";
    case EditKind::Remove: return "remove";
    case EditKind::Modify: return "modify";
    }
    return "add";
}

std::optional<EditKind> edit_kind_from_string(std::string_view s) noexcept {
    std::string lowered = dimension_key(s);
    for (auto k : {EditKind::Add, EditKind::Remove, EditKind::Modify}) {
        if (to_string(k) == lowered) {
            return k;
        }
    }
    return std::nullopt;
}

std::string_view to_string(OverlapPolicy p) noexcept {
    return p == OverlapPolicy::DisjointAttributes ? "disjoint_attributes" : "unconstrained";
}

std::optional<OverlapPolicy> overlap_policy_from_string(std::string_view s) noexcept {
    if (s == "disjoint_attributes") {
        return OverlapPolicy::DisjointAttributes;
    }
    if (s == "unconstrained") {
        return OverlapPolicy::Unconstrained;
    }
    return std::nullopt;
}

EditKind TreeEdit::kind() const noexcept {
    return static_cast<EditKind>(payload.index());
}

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return std::string(s);
}

std::string dimension_key(std::string_view name) {
    std::string key = trim(name);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return key;
}

const Dimension* ConceptTree::find(std::string_view dimension_name) const {
    const std::string key = dimension_key(dimension_name);
    for (const auto& d : dimensions) {
        if (dimension_key(d.name) == key) {
            return &d;
        }
    }
    return nullptr;
}

bool structurally_equal(const ConceptTree& a, const ConceptTree& b) {
    return a.root == b.root && a.dimensions == b.dimensions;
}

ValidationReport validate(const ConceptTree& tree) {
    ValidationReport report;
    auto violation = [&report](std::string text) {
        report.ok = false;
        report.violations.push_back(std::move(text));
    };

    if (trim(tree.root).empty()) {
        violation("empty root");
    }
    if (tree.dimensions.empty()) {
        violation("tree has no dimensions");
    }
    std::unordered_set<std::string> seen_dims;
    for (const auto& d : tree.dimensions) {
        const std::string key = dimension_key(d.name);
        if (key.empty()) {
            violation("empty dimension name");
        } else if (!seen_dims.insert(key).second) {
            violation("duplicate dimension name \"" + d.name + "\"");
        }
        if (d.attributes.empty()) {
            violation("dimension \"" + d.name + "\" has no attributes");
        }
        std::unordered_set<std::string> seen_attrs;
        for (const auto& a : d.attributes) {
            if (trim(a).empty()) {
                violation("dimension \"" + d.name + "\" has an empty attribute");
            } else if (!seen_attrs.insert(a).second) {
                violation("duplicate attribute \"" + a + "\" in dimension \"" + d.name + "\"");
            }
        }
    }
    return report;
}

void ensure_valid(const ConceptTree& tree) {
    auto report = validate(tree);
    if (report.ok) {
        return;
    }
    std::string joined;
    for (const auto& v : report.violations) {
        if (!joined.empty()) {
            joined += "; ";
        }
        joined += v;
    }
    fail(ErrorCode::ValidationFailed, "tree \"" + tree.concept_id + "\": " + joined);
}

namespace {

void check_dimension(const Dimension& d) {
    ConceptTree probe{"", "probe", {d}, Provenance::UserBuilt, 0};
    auto report = validate(probe);
    if (!report.ok) {
        fail(ErrorCode::ValidationFailed, "invalid dimension: " + report.violations.front());
    }
}

std::vector<Dimension>::const_iterator locate(const ConceptTree& tree, std::string_view name) {
    const std::string key = dimension_key(name);
    return std::find_if(tree.dimensions.begin(), tree.dimensions.end(),
                        [&](const Dimension& d) { return dimension_key(d.name) == key; });
}

} // namespace

ConceptTree apply_edit(const ConceptTree& tree, const TreeEdit& edit) {
    ConceptTree out = tree;
    out.provenance = Provenance::DerivedEdit;

    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, AddDimension>) {
                check_dimension(op.added);
                if (tree.find(op.added.name) != nullptr) {
                    fail(ErrorCode::DuplicateDimension, "dimension \"" + op.added.name + "\" already exists");
                }
                out.dimensions.push_back(op.added);
            } else if constexpr (std::is_same_v<T, RemoveDimension>) {
                auto it = locate(tree, op.name);
                if (it == tree.dimensions.end()) {
                    fail(ErrorCode::UnknownDimension, "no dimension \"" + op.name + "\"");
                }
                if (tree.dimensions.size() == 1) {
                    fail(ErrorCode::EmptyTree, "removing \"" + op.name + "\" would leave no dimensions");
                }
                out.dimensions.erase(out.dimensions.begin() + (it - tree.dimensions.begin()));
            } else {
                check_dimension(op.replacement);
                auto it = locate(tree, op.old_name);
                if (it == tree.dimensions.end()) {
                    fail(ErrorCode::UnknownDimension, "no dimension \"" + op.old_name + "\"");
                }
                const auto* clash = tree.find(op.replacement.name);
                if (clash != nullptr && clash != &*it) {
                    fail(ErrorCode::DuplicateDimension,
                         "dimension \"" + op.replacement.name + "\" already exists");
                }
                out.dimensions[static_cast<std::size_t>(it - tree.dimensions.begin())] = op.replacement;
            }
        },
        edit.payload);
    return out;
}

ConceptTree apply_edit_sequence(const ConceptTree& tree, const std::vector<TreeEdit>& edits) {
    ConceptTree running = tree;
    for (std::size_t i = 0; i < edits.size(); ++i) {
        try {
            running = apply_edit(running, edits[i]);
        } catch (const Error& e) {
            throw Error(e.code(), "edit " + std::to_string(i) + ": " + e.what());
        }
    }
    if (!edits.empty()) {
        running.edit_count = tree.edit_count + edits.size();
    }
    return running;
}

MergeResult merge(const std::vector<ConceptTree>& trees, OverlapPolicy policy, std::string scene_id) {
    if (trees.size() < 2) {
        fail(ErrorCode::Precondition, "merge needs at least two trees, got " + std::to_string(trees.size()));
    }
    std::set<std::string> ids;
    for (const auto& t : trees) {
        if (!ids.insert(t.concept_id).second) {
            fail(ErrorCode::DuplicateConceptId, "concept id \"" + t.concept_id + "\" appears twice");
        }
    }

    MergeResult result;
    result.forest.scene_id = std::move(scene_id);
    result.forest.overlap_policy = policy;
    if (policy == OverlapPolicy::Unconstrained) {
        result.forest.trees = trees;
        return result;
    }

    // attribute -> concept that claimed it first
    std::unordered_map<std::string, std::string> owner;
    for (const auto& tree : trees) {
        ConceptTree kept = tree;
        for (auto& dim : kept.dimensions) {
            std::vector<std::string> survivors;
            for (const auto& attr : dim.attributes) {
                auto [it, inserted] = owner.emplace(attr, tree.concept_id);
                if (inserted || it->second == tree.concept_id) {
                    survivors.push_back(attr);
                } else {
                    result.removals.push_back({tree.concept_id, dim.name, attr, it->second});
                }
            }
            if (survivors.empty()) {
                fail(ErrorCode::DimensionEmptiedByDeconfliction,
                     "dimension \"" + dim.name + "\" of \"" + tree.concept_id + "\" lost every attribute");
            }
            dim.attributes = std::move(survivors);
        }
        result.forest.trees.push_back(std::move(kept));
    }
    return result;
}

namespace {

using json_util::Json;

Json tree_to_json(const ConceptTree& tree) {
    Json dims = Json::array();
    for (const auto& d : tree.dimensions) {
        dims.push_back(Json{{"attributes", d.attributes}, {"name", d.name}});
    }
    return Json{{"concept_id", tree.concept_id},
                {"dimensions", std::move(dims)},
                {"edit_count", tree.edit_count},
                {"provenance", std::string(to_string(tree.provenance))},
                {"root", tree.root}};
}

std::vector<Dimension> dimensions_from_json(const Json& dims, const std::string& where) {
    if (!dims.is_array()) {
        throw SchemaError(where + "dimensions", "expected a list");
    }
    std::vector<Dimension> out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const auto& d = dims[i];
        const std::string at = where + "dimensions[" + std::to_string(i) + "].";
        json_util::expect_fields(d, {"name", "attributes"}, {}, at);
        Dimension dim;
        dim.name = json_util::get_string(d, "name", at);
        const auto& attrs = d.at("attributes");
        if (!attrs.is_array()) {
            throw SchemaError(at + "attributes", "expected a list");
        }
        for (const auto& a : attrs) {
            if (!a.is_string()) {
                throw SchemaError(at + "attributes", "expected strings");
            }
            dim.attributes.push_back(a.get<std::string>());
        }
        out.push_back(std::move(dim));
    }
    return out;
}

ConceptTree tree_from_json(const Json& j, const std::string& where) {
    json_util::expect_fields(j, {"concept_id", "root", "dimensions", "provenance"}, {"edit_count"}, where);
    ConceptTree tree;
    tree.concept_id = json_util::get_string(j, "concept_id", where);
    tree.root = json_util::get_string(j, "root", where);
    tree.dimensions = dimensions_from_json(j.at("dimensions"), where);
    const std::string prov = json_util::get_string(j, "provenance", where);
    auto p = provenance_from_string(prov);
    if (!p) {
        throw SchemaError(where + "provenance", "unknown value \"" + prov + "\"");
    }
    tree.provenance = *p;
    if (j.contains("edit_count")) {
        if (!j.at("edit_count").is_number_unsigned()) {
            throw SchemaError(where + "edit_count", "expected a non-negative integer");
        }
        tree.edit_count = j.at("edit_count").get<std::size_t>();
    }
    return tree;
}

} // namespace

std::string serialize(const ConceptTree& tree) {
    return tree_to_json(tree).dump(2) + "\n";
}

std::string serialize(const ConceptForest& forest) {
    Json trees = Json::array();
    for (const auto& t : forest.trees) {
        trees.push_back(tree_to_json(t));
    }
    Json doc{{"overlap_policy", std::string(to_string(forest.overlap_policy))},
             {"scene_id", forest.scene_id},
             {"trees", std::move(trees)}};
    return doc.dump(2) + "\n";
}

ConceptTree deserialize_tree(std::string_view document) {
    return tree_from_json(json_util::parse(document), "");
}

ConceptForest deserialize_forest(std::string_view document) {
    Json j = json_util::parse(document);
    json_util::expect_fields(j, {"scene_id", "overlap_policy", "trees"}, {}, "");
    ConceptForest forest;
    forest.scene_id = json_util::get_string(j, "scene_id", "");
    const std::string policy = json_util::get_string(j, "overlap_policy", "");
    auto p = overlap_policy_from_string(policy);
    if (!p) {
        throw SchemaError("overlap_policy", "unknown value \"" + policy + "\"");
    }
    forest.overlap_policy = *p;
    const auto& trees = j.at("trees");
    if (!trees.is_array()) {
        throw SchemaError("trees", "expected a list");
    }
    for (std::size_t i = 0; i < trees.size(); ++i) {
        forest.trees.push_back(tree_from_json(trees[i], "trees[" + std::to_string(i) + "]."));
    }
    return forest;
}

bool is_forest_document(std::string_view document) {
    Json j = json_util::parse(document);
    return j.is_object() && j.contains("trees");
}

std::string tree_body_json(const ConceptTree& tree) {
    json_util::OrderedJson dims = json_util::OrderedJson::array();
    for (const auto& d : tree.dimensions) {
        json_util::OrderedJson entry;
        entry["name"] = d.name;
        entry["attributes"] = d.attributes;
        dims.push_back(std::move(entry));
    }
    json_util::OrderedJson body;
    body["root"] = tree.root;
    body["dimensions"] = std::move(dims);
    return body.dump();
}

std::size_t assignment_space_size(const ConceptTree& tree) {
    std::size_t product = 1;
    for (const auto& d : tree.dimensions) {
        const std::size_t n = d.attributes.size();
        if (n == 0) {
            return 0;
        }
        if (product > std::numeric_limits<std::size_t>::max() / n) {
            return std::numeric_limits<std::size_t>::max();
        }
        product *= n;
    }
    return product;
}

} // namespace catsynth
