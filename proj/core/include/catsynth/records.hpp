// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "catsynth/backends.hpp"
#include "catsynth/pcs_filter.hpp"
#include "catsynth/prompt_synth.hpp"

namespace catsynth {

/// Line-delimited files passed between pipeline stages. Each record is one
/// JSON object per line with sorted keys; readers reject unknown fields.

struct GeneratedSample {
    ImageRef image;
    PromptSpec spec;
    GenerationMode mode = GenerationMode::Base;
    // seed handed to the image backend
    std::uint64_t generation_seed = 0;

    bool operator==(const GeneratedSample&) const = default;
};

/// One line of a filter report. PCS lines carry s_original / s_disturbed /
/// pcs, text-image lines carry similarity.
struct FilterReportLine {
    ImageRef sample;
    SampleRole role = SampleRole::Positive;
    std::string prompt;
    std::uint64_t seed = 0;
    std::string source_tree;
    std::optional<double> s_original;
    std::optional<double> s_disturbed;
    std::optional<double> pcs;
    std::optional<double> similarity;
    double threshold = 0.0;
    bool kept = false;
    std::vector<ReferenceSimilarity> per_reference;
};

FilterReportLine report_line(const GeneratedSample& sample, const PCSRecord& record);
FilterReportLine report_line(const GeneratedSample& sample, const TextImageRecord& record);

std::string to_jsonl(const std::vector<PromptSpec>& plan);
std::vector<PromptSpec> prompt_plan_from_jsonl(std::string_view text);

std::string to_jsonl(const std::vector<GeneratedSample>& samples);
std::vector<GeneratedSample> samples_from_jsonl(std::string_view text);

std::string to_jsonl(const std::vector<FilterReportLine>& report);
std::vector<FilterReportLine> report_from_jsonl(std::string_view text);

/// Embedding files: {"id", "encoder", "values"} per line.
struct NamedEmbedding {
    std::string id;
    EmbeddingVector vector;
};

std::string to_jsonl(const std::vector<NamedEmbedding>& embeddings);
std::vector<NamedEmbedding> embeddings_from_jsonl(std::string_view text);

} // namespace catsynth
