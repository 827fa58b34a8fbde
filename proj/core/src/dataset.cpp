// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/dataset.hpp"

#include <algorithm>
#include <set>

#include "catsynth/content_store.hpp"
#include "catsynth/digest.hpp"
#include "catsynth/parallel.hpp"
#include "catsynth/templates.hpp"
#include "catsynth/tree_builder.hpp"
#include "json_util.hpp"

namespace catsynth {

using json_util::Json;

namespace {

constexpr std::string_view kManifestFormat = "catsynth-manifest";

constexpr EntryRole kAllRoles[] = {EntryRole::UserPositive, EntryRole::SynPositive, EntryRole::EasyNegative,
                                   EntryRole::HardNegative};

bool is_synthetic(EntryRole role) {
    return role != EntryRole::UserPositive;
}

bool is_positive(EntryRole role) {
    return role == EntryRole::UserPositive || role == EntryRole::SynPositive;
}

} // namespace

std::string_view to_string(EntryRole role) noexcept {
    switch (role) {
    case EntryRole::UserPositive: return "user_positive";
    case EntryRole::SynPositive: return "syn_positive";
    case EntryRole::EasyNegative: return "easy_negative";
    case EntryRole::HardNegative: return "hard_negative";
    }
    return "user_positive";
}

std::optional<EntryRole> entry_role_from_string(std::string_view s) noexcept {
    for (auto r : kAllRoles) {
        if (to_string(r) == s) {
            return r;
        }
    }
    return std::nullopt;
}

DatasetEntry user_entry(const ImageRef& image, std::string concept_id) {
    DatasetEntry e;
    e.sample = image;
    e.role = EntryRole::UserPositive;
    e.concept_id = std::move(concept_id);
    return e;
}

DatasetEntry synthetic_entry(const FilterReportLine& line, std::string concept_id) {
    DatasetEntry e;
    e.sample = line.sample;
    switch (line.role) {
    case SampleRole::Positive: e.role = EntryRole::SynPositive; break;
    case SampleRole::EasyNegative: e.role = EntryRole::EasyNegative; break;
    case SampleRole::HardNegative: e.role = EntryRole::HardNegative; break;
    }
    e.prompt = line.prompt;
    e.seed = line.seed;
    e.pcs = line.pcs;
    e.similarity = line.similarity;
    e.kept = line.kept;
    e.concept_id = std::move(concept_id);
    return e;
}

std::string config_digest(const std::map<std::string, std::string>& config) {
    std::string canonical;
    for (const auto& [key, value] : config) {
        canonical += key + "=" + value + "\n";
    }
    return sha256_hex(canonical);
}

DatasetManifest assemble(std::span<const DatasetEntry> user, std::span<const DatasetEntry> pos,
                         std::span<const DatasetEntry> easy, std::span<const DatasetEntry> hard,
                         std::map<std::string, std::string> config) {
    DatasetManifest m;
    for (auto r : kAllRoles) {
        m.counts[std::string(to_string(r))] = 0;
    }
    std::set<std::string> addresses;
    std::set<std::string> concepts;
    auto add = [&](std::span<const DatasetEntry> entries, EntryRole role) {
        for (const auto& entry : entries) {
            DatasetEntry e = entry;
            e.role = role;
            const std::string label =
                std::string(to_string(role)) + " entry " + (e.sample ? e.sample->address : std::string("<text>"));
            if (is_synthetic(role)) {
                if (!e.kept.value_or(false)) {
                    fail(ErrorCode::UnfilteredEntry, label + " did not pass its filter");
                }
                require(e.seed.has_value(), label + " has no generation seed");
            } else {
                require(!e.prompt.has_value(), label + " must not carry a prompt");
            }
            if (e.sample && !addresses.insert(e.sample->address).second) {
                fail(ErrorCode::DuplicateSample, "sample " + e.sample->address + " appears more than once");
            }
            concepts.insert(e.concept_id);
            ++m.counts[std::string(to_string(role))];
            m.entries.push_back(std::move(e));
        }
    };
    add(user, EntryRole::UserPositive);
    add(pos, EntryRole::SynPositive);
    add(easy, EntryRole::EasyNegative);
    add(hard, EntryRole::HardNegative);
    m.concept_ids.assign(concepts.begin(), concepts.end());
    m.config = std::move(config);
    m.config_digest = config_digest(m.config);
    return m;
}

std::vector<ChatMessage> instruction_pairs_request(const DatasetEntry& entry, std::string_view concept_name,
                                                   std::size_t n_pairs) {
    require(entry.sample.has_value(), "instruction pairs need an image entry");
    const TemplateId id =
        is_positive(entry.role) ? TemplateId::InstructionPairsPositive : TemplateId::InstructionPairsNegative;
    const std::string text = render_template(id, {{"num", std::to_string(n_pairs)},
                                                  {"concept", std::string(concept_name)},
                                                  {"prompt", entry.prompt.value_or("(none)")}});
    return {ChatMessage{"user", text, {*entry.sample}}};
}

namespace {

std::optional<std::vector<InstructionPair>> parse_pairs(std::string_view reply) {
    auto blocks = fenced_blocks(reply);
    if (blocks.empty()) {
        blocks.emplace_back(reply);
    }
    for (const auto& block : blocks) {
        Json j;
        try {
            j = json_util::parse(block);
        } catch (const ParseError&) {
            continue;
        }
        if (!j.is_array()) {
            continue;
        }
        std::vector<InstructionPair> pairs;
        for (const auto& item : j) {
            if (!item.is_object() || !item.contains("question") || !item.contains("answer") ||
                !item["question"].is_string() || !item["answer"].is_string()) {
                pairs.clear();
                break;
            }
            InstructionPair p{trim(item["question"].get<std::string>()), trim(item["answer"].get<std::string>())};
            if (p.question.empty() || p.answer.empty()) {
                pairs.clear();
                break;
            }
            pairs.push_back(std::move(p));
        }
        if (!pairs.empty()) {
            return pairs;
        }
    }
    return std::nullopt;
}

} // namespace

DatasetEntry generate_instruction_pairs(DatasetEntry entry, ChatBackend& llm, std::size_t n_pairs,
                                        std::string_view concept_name) {
    require(entry.sample.has_value(), "instruction pairs need an image entry");
    if (n_pairs == 0) {
        return entry;
    }
    const std::string name = concept_name.empty() ? entry.concept_id : std::string(concept_name);
    auto request = instruction_pairs_request(entry, name, n_pairs);
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto pairs = parse_pairs(llm.chat(request));
        if (pairs && pairs->size() >= n_pairs) {
            pairs->resize(n_pairs);
            entry.instruction_pairs.insert(entry.instruction_pairs.end(), pairs->begin(), pairs->end());
            return entry;
        }
        request = with_reminder(std::move(request));
    }
    fail(ErrorCode::MalformedResponse, "no usable list of " + std::to_string(n_pairs) +
                                           " question/answer pairs for " + entry.sample->address);
}

std::vector<DatasetEntry> generate_instruction_pairs(std::vector<DatasetEntry> entries, ChatBackend& llm,
                                                     std::size_t n_pairs, std::string_view concept_name,
                                                     std::size_t threads) {
    parallel_for(entries.size(), threads, [&](std::size_t i) {
        if (entries[i].sample) {
            entries[i] = generate_instruction_pairs(std::move(entries[i]), llm, n_pairs, concept_name);
        }
    });
    return entries;
}

namespace {

Json entry_json(const DatasetEntry& e) {
    Json j{{"role", to_string(e.role)}, {"concept_id", e.concept_id}};
    j["sample"] = e.sample ? Json{{"address", e.sample->address},
                                  {"width", e.sample->width},
                                  {"height", e.sample->height},
                                  {"pixel_format", e.sample->pixel_format}}
                           : Json(nullptr);
    j["prompt"] = e.prompt ? Json(*e.prompt) : Json(nullptr);
    j["seed"] = e.seed ? Json(*e.seed) : Json(nullptr);
    j["pcs"] = e.pcs ? Json(*e.pcs) : Json(nullptr);
    j["similarity"] = e.similarity ? Json(*e.similarity) : Json(nullptr);
    j["kept"] = e.kept ? Json(*e.kept) : Json(nullptr);
    Json pairs = Json::array();
    for (const auto& p : e.instruction_pairs) {
        pairs.push_back(Json{{"question", p.question}, {"answer", p.answer}});
    }
    j["instruction_pairs"] = std::move(pairs);
    return j;
}

template <typename T, typename Get>
std::optional<T> nullable(const Json& j, const char* field, const std::string& where, Get&& get) {
    const auto& v = j.at(field);
    if (v.is_null()) {
        return std::nullopt;
    }
    return get(v, where + field);
}

DatasetEntry entry_from(const Json& j, const std::string& where) {
    json_util::expect_fields(j,
                             {"role", "concept_id", "sample", "prompt", "seed", "pcs", "similarity", "kept",
                              "instruction_pairs"},
                             {}, where);
    DatasetEntry e;
    const auto role = json_util::get_string(j, "role", where);
    auto r = entry_role_from_string(role);
    if (!r) {
        throw SchemaError(where + "role", "unknown role \"" + role + "\"");
    }
    e.role = *r;
    e.concept_id = json_util::get_string(j, "concept_id", where);
    e.sample = nullable<ImageRef>(j, "sample", where, [](const Json& v, const std::string& w) {
        json_util::expect_fields(v, {"address", "width", "height", "pixel_format"}, {}, w + ".");
        return ImageRef{json_util::get_string(v, "address", w + "."),
                        static_cast<int>(json_util::get_number(v, "width", w + ".")),
                        static_cast<int>(json_util::get_number(v, "height", w + ".")),
                        json_util::get_string(v, "pixel_format", w + ".")};
    });
    e.prompt = nullable<std::string>(j, "prompt", where, [](const Json& v, const std::string& w) {
        if (!v.is_string()) {
            throw SchemaError(w, "expected a string");
        }
        return v.get<std::string>();
    });
    e.seed = nullable<std::uint64_t>(j, "seed", where, [](const Json& v, const std::string& w) {
        if (!v.is_number_unsigned()) {
            throw SchemaError(w, "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    });
    auto number = [](const Json& v, const std::string& w) {
        if (!v.is_number()) {
            throw SchemaError(w, "expected a number");
        }
        return v.get<double>();
    };
    e.pcs = nullable<double>(j, "pcs", where, number);
    e.similarity = nullable<double>(j, "similarity", where, number);
    e.kept = nullable<bool>(j, "kept", where, [](const Json& v, const std::string& w) {
        if (!v.is_boolean()) {
            throw SchemaError(w, "expected a boolean");
        }
        return v.get<bool>();
    });
    const auto& pairs = j.at("instruction_pairs");
    if (!pairs.is_array()) {
        throw SchemaError(where + "instruction_pairs", "expected an array");
    }
    for (const auto& p : pairs) {
        const std::string w = where + "instruction_pairs.";
        json_util::expect_fields(p, {"question", "answer"}, {}, w);
        e.instruction_pairs.push_back({json_util::get_string(p, "question", w), json_util::get_string(p, "answer", w)});
    }
    return e;
}

} // namespace

std::string serialize_manifest(const DatasetManifest& m) {
    Json header{{"format", kManifestFormat},
                {"version", kManifestVersion},
                {"concept_ids", m.concept_ids},
                {"counts", m.counts},
                {"config", m.config},
                {"config_digest", m.config_digest},
                {"entry_count", m.entries.size()}};
    std::string out = json_util::line(header) + "\n";
    for (const auto& e : m.entries) {
        out += json_util::line(entry_json(e)) + "\n";
    }
    return out;
}

DatasetManifest parse_manifest(std::string_view text) {
    if (!text.empty() && text.back() != '\n') {
        throw SchemaError("entries", "last record is not terminated (truncated file?)");
    }
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        lines.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    if (lines.empty()) {
        throw SchemaError("header", "empty manifest");
    }
    auto parse_line = [](std::string_view line, std::size_t number) {
        try {
            return json_util::parse(line);
        } catch (const ParseError& e) {
            throw ParseError("malformed manifest record", number, e.column());
        }
    };
    const Json header = parse_line(lines[0], 1);
    json_util::expect_fields(header, {"format", "version", "concept_ids", "counts", "config", "config_digest",
                                      "entry_count"},
                             {}, "header.");
    if (json_util::get_string(header, "format", "header.") != kManifestFormat) {
        throw SchemaError("header.format", "not a manifest");
    }
    if (header.at("version") != kManifestVersion) {
        throw SchemaError("header.version", "unsupported version " + header.at("version").dump());
    }
    DatasetManifest m;
    try {
        m.concept_ids = header.at("concept_ids").get<std::vector<std::string>>();
        m.counts = header.at("counts").get<std::map<std::string, std::size_t>>();
        m.config = header.at("config").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("header", e.what());
    }
    m.config_digest = json_util::get_string(header, "config_digest", "header.");
    const auto expected = header.at("entry_count").get<std::size_t>();
    if (lines.size() - 1 != expected) {
        throw SchemaError("entries", "expected " + std::to_string(expected) + " entries, found " +
                                         std::to_string(lines.size() - 1) + " (truncated file?)");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        m.entries.push_back(entry_from(parse_line(lines[i], i + 1), "entry " + std::to_string(i) + ": "));
    }
    std::map<std::string, std::size_t> tally;
    for (auto r : kAllRoles) {
        tally[std::string(to_string(r))] = 0;
    }
    for (const auto& e : m.entries) {
        ++tally[std::string(to_string(e.role))];
    }
    if (tally != m.counts) {
        throw SchemaError("header.counts", "counts do not match the entries");
    }
    if (config_digest(m.config) != m.config_digest) {
        throw SchemaError("header.config_digest", "digest does not match config");
    }
    return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_manifest(manifest));
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_file(path));
}

} // namespace catsynth
