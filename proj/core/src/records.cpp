// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "catsynth/records.hpp"

#include "json_util.hpp"

namespace catsynth {

using json_util::Json;

namespace {

template <typename F>
void for_each_line(std::string_view text, F&& f) {
    std::size_t pos = 0;
    std::size_t number = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++number;
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        try {
            f(json_util::parse(line), "line " + std::to_string(number) + ": ");
        } catch (const ParseError& e) {
            throw ParseError("malformed record", number, e.column());
        }
    }
}

Json image_json(const ImageRef& ref) {
    return Json{{"address", ref.address},
                {"width", ref.width},
                {"height", ref.height},
                {"pixel_format", ref.pixel_format}};
}

ImageRef image_from(const Json& j, const std::string& where) {
    json_util::expect_fields(j, {"address", "width", "height"}, {"pixel_format"}, where);
    ImageRef ref;
    ref.address = json_util::get_string(j, "address", where);
    ref.width = static_cast<int>(json_util::get_number(j, "width", where));
    ref.height = static_cast<int>(json_util::get_number(j, "height", where));
    if (j.contains("pixel_format")) {
        ref.pixel_format = json_util::get_string(j, "pixel_format", where);
    }
    return ref;
}

SampleRole role_from(const Json& j, const std::string& where) {
    const auto s = json_util::get_string(j, "role", where);
    auto role = sample_role_from_string(s);
    if (!role) {
        throw SchemaError(where + "role", "unknown role \"" + s + "\"");
    }
    return *role;
}

std::uint64_t seed_from(const Json& j, const std::string& where) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw SchemaError(where + "seed", "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

Json spec_json(const PromptSpec& spec) {
    Json picks = Json::array();
    for (const auto& [dim, attr] : spec.assignment.picks) {
        picks.push_back(Json::array({dim, attr}));
    }
    return Json{{"text", spec.text},
                {"role", to_string(spec.role)},
                {"seed", spec.seed},
                {"source_tree", spec.source_tree},
                {"tree_ref", spec.assignment.tree_ref},
                {"assignment", std::move(picks)}};
}

PromptSpec spec_from(const Json& j, const std::string& where) {
    PromptSpec spec;
    spec.text = json_util::get_string(j, "text", where);
    spec.role = role_from(j, where);
    spec.seed = seed_from(j, where);
    spec.source_tree = json_util::get_string(j, "source_tree", where);
    spec.assignment.tree_ref = json_util::get_string(j, "tree_ref", where);
    const auto& picks = j.at("assignment");
    if (!picks.is_array()) {
        throw SchemaError(where + "assignment", "expected an array");
    }
    for (const auto& p : picks) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string()) {
            throw SchemaError(where + "assignment", "expected [dimension, attribute] pairs");
        }
        spec.assignment.picks.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
    return spec;
}

std::optional<double> optional_number(const Json& j, const char* field, const std::string& where) {
    if (!j.contains(field)) {
        return std::nullopt;
    }
    return json_util::get_number(j, field, where);
}

} // namespace

FilterReportLine report_line(const GeneratedSample& sample, const PCSRecord& record) {
    FilterReportLine line;
    line.sample = record.sample;
    line.role = sample.spec.role;
    line.prompt = sample.spec.text;
    line.seed = sample.generation_seed;
    line.source_tree = sample.spec.source_tree;
    line.s_original = record.s_original;
    line.s_disturbed = record.s_disturbed;
    line.pcs = record.pcs;
    line.threshold = record.threshold;
    line.kept = record.kept;
    line.per_reference = record.per_reference;
    return line;
}

FilterReportLine report_line(const GeneratedSample& sample, const TextImageRecord& record) {
    FilterReportLine line;
    line.sample = record.sample;
    line.role = sample.spec.role;
    line.prompt = sample.spec.text;
    line.seed = sample.generation_seed;
    line.source_tree = sample.spec.source_tree;
    line.similarity = record.similarity;
    line.threshold = record.threshold;
    line.kept = record.kept;
    return line;
}

std::string to_jsonl(const std::vector<PromptSpec>& plan) {
    std::string out;
    for (const auto& spec : plan) {
        out += json_util::line(spec_json(spec)) + "\n";
    }
    return out;
}

std::vector<PromptSpec> prompt_plan_from_jsonl(std::string_view text) {
    std::vector<PromptSpec> out;
    for_each_line(text, [&](const Json& j, const std::string& where) {
        json_util::expect_fields(j, {"text", "role", "seed", "source_tree", "tree_ref", "assignment"}, {}, where);
        out.push_back(spec_from(j, where));
    });
    return out;
}

std::string to_jsonl(const std::vector<GeneratedSample>& samples) {
    std::string out;
    for (const auto& s : samples) {
        Json j = spec_json(s.spec);
        j["image"] = image_json(s.image);
        j["mode"] = to_string(s.mode);
        j["generation_seed"] = s.generation_seed;
        out += json_util::line(j) + "\n";
    }
    return out;
}

std::vector<GeneratedSample> samples_from_jsonl(std::string_view text) {
    std::vector<GeneratedSample> out;
    for_each_line(text, [&](const Json& j, const std::string& where) {
        json_util::expect_fields(j, {"text", "role", "seed", "source_tree", "tree_ref", "assignment", "image", "mode",
                                  "generation_seed"},
                                 {}, where);
        GeneratedSample s;
        s.spec = spec_from(j, where);
        s.image = image_from(j.at("image"), where + "image.");
        const auto mode = json_util::get_string(j, "mode", where);
        auto m = generation_mode_from_string(mode);
        if (!m) {
            throw SchemaError(where + "mode", "unknown generation mode \"" + mode + "\"");
        }
        s.mode = *m;
        const auto& g = j.at("generation_seed");
        if (!g.is_number_unsigned()) {
            throw SchemaError(where + "generation_seed", "expected a non-negative integer");
        }
        s.generation_seed = g.get<std::uint64_t>();
        out.push_back(std::move(s));
    });
    return out;
}

std::string to_jsonl(const std::vector<FilterReportLine>& report) {
    std::string out;
    for (const auto& r : report) {
        Json j{{"sample", image_json(r.sample)},
               {"role", to_string(r.role)},
               {"prompt", r.prompt},
               {"seed", r.seed},
               {"source_tree", r.source_tree},
               {"tau", r.threshold},
               {"kept", r.kept}};
        if (r.pcs) {
            j["S_o"] = *r.s_original;
            j["S_d"] = *r.s_disturbed;
            j["pcs"] = *r.pcs;
            Json refs = Json::array();
            for (const auto& p : r.per_reference) {
                refs.push_back(Json{{"reference", p.reference}, {"S_o", p.s_original}, {"S_d", p.s_disturbed}});
            }
            j["references"] = std::move(refs);
        }
        if (r.similarity) {
            j["similarity"] = *r.similarity;
        }
        out += json_util::line(j) + "\n";
    }
    return out;
}

std::vector<FilterReportLine> report_from_jsonl(std::string_view text) {
    std::vector<FilterReportLine> out;
    for_each_line(text, [&](const Json& j, const std::string& where) {
        json_util::expect_fields(j, {"sample", "role", "prompt", "seed", "source_tree", "tau", "kept"},
                                 {"S_o", "S_d", "pcs", "references", "similarity"}, where);
        FilterReportLine r;
        r.sample = image_from(j.at("sample"), where + "sample.");
        r.role = role_from(j, where);
        r.prompt = json_util::get_string(j, "prompt", where);
        r.seed = seed_from(j, where);
        r.source_tree = json_util::get_string(j, "source_tree", where);
        r.threshold = json_util::get_number(j, "tau", where);
        if (!j.at("kept").is_boolean()) {
            throw SchemaError(where + "kept", "expected a boolean");
        }
        r.kept = j.at("kept").get<bool>();
        r.s_original = optional_number(j, "S_o", where);
        r.s_disturbed = optional_number(j, "S_d", where);
        r.pcs = optional_number(j, "pcs", where);
        r.similarity = optional_number(j, "similarity", where);
        if (r.pcs.has_value() != (r.s_original.has_value() && r.s_disturbed.has_value())) {
            throw SchemaError(where + "pcs", "pcs, S_o and S_d must appear together");
        }
        if (!r.pcs && !r.similarity) {
            throw SchemaError(where + "pcs", "record has neither a pcs nor a similarity score");
        }
        if (j.contains("references")) {
            for (const auto& p : j.at("references")) {
                const std::string w = where + "references.";
                json_util::expect_fields(p, {"reference", "S_o", "S_d"}, {}, w);
                r.per_reference.push_back({json_util::get_string(p, "reference", w),
                                           json_util::get_number(p, "S_o", w), json_util::get_number(p, "S_d", w)});
            }
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::string to_jsonl(const std::vector<NamedEmbedding>& embeddings) {
    std::string out;
    for (const auto& e : embeddings) {
        out += json_util::line(Json{{"id", e.id}, {"encoder", e.vector.encoder}, {"values", e.vector.values}}) + "\n";
    }
    return out;
}

std::vector<NamedEmbedding> embeddings_from_jsonl(std::string_view text) {
    std::vector<NamedEmbedding> out;
    for_each_line(text, [&](const Json& j, const std::string& where) {
        json_util::expect_fields(j, {"id", "values"}, {"encoder"}, where);
        NamedEmbedding e;
        e.id = json_util::get_string(j, "id", where);
        if (j.contains("encoder")) {
            e.vector.encoder = json_util::get_string(j, "encoder", where);
        }
        const auto& values = j.at("values");
        if (!values.is_array()) {
            throw SchemaError(where + "values", "expected an array of numbers");
        }
        for (const auto& v : values) {
            if (!v.is_number()) {
                throw SchemaError(where + "values", "expected an array of numbers");
            }
            e.vector.values.push_back(v.get<double>());
        }
        out.push_back(std::move(e));
    });
    return out;
}

} // namespace catsynth
