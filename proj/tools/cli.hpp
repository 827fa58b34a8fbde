// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "catsynth/backends.hpp"
#include "catsynth/error.hpp"
#include "catsynth/pcs_filter.hpp"
#include "catsynth/tree_builder.hpp"

namespace catsynth::cli {

struct Thresholds {
    double positive = kPositiveThreshold;
    double hard_negative = kHardNegativeThreshold;
    double text = kTextImageThreshold;
};

struct PlanSizes {
    std::size_t positive = 20;
    std::size_t easy_negative = 20;
    std::size_t hard_negative = 20;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::filesystem::path store = "catsynth-store";
    std::size_t threads = 4;
    bool mock = false;
    std::filesystem::path fixtures;
    std::string concept_id = "concept";
    std::string subject_token = "<sks>";
    std::size_t instruction_pairs = 2;

    std::optional<BackendConfig> chat;
    // falls back to `chat` when absent
    std::optional<BackendConfig> vlm;
    std::optional<BackendConfig> image;
    std::optional<BackendConfig> embed;

    Thresholds thresholds;
    PerturbConfig perturb;
    // perturbation seed; the global seed when unset
    std::optional<std::uint64_t> perturb_seed;
    std::optional<std::size_t> diversity_k;
    std::optional<std::uint64_t> diversity_seed;
    PlanSizes plan;
    BuilderConfig builder;

    /// Throws Config.
    void validate() const;
};

/// Parses the JSON config document. Unknown keys, wrong types and violated
/// invariants raise Config.
PipelineConfig parse_config(std::string_view document);
PipelineConfig load_config(const std::filesystem::path& path);

/// 0 ok, 2 config, 3 backend, 4 validation, 5 io.
int exit_code(ErrorFamily family) noexcept;

/// Runs one subcommand. `args` excludes the program name. Structured log
/// lines go to `log`; artifacts only to the paths named on the command line.
int run(const std::vector<std::string>& args, std::ostream& log);

} // namespace catsynth::cli
