// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catsynth/backends.hpp"
#include "catsynth/records.hpp"

namespace catsynth {

enum class EntryRole { UserPositive, SynPositive, EasyNegative, HardNegative };

std::string_view to_string(EntryRole role) noexcept;
std::optional<EntryRole> entry_role_from_string(std::string_view s) noexcept;

struct InstructionPair {
    std::string question;
    std::string answer;

    bool operator==(const InstructionPair&) const = default;
};

struct DatasetEntry {
    // empty for text-only entries
    std::optional<ImageRef> sample;
    EntryRole role = EntryRole::UserPositive;
    std::optional<std::string> prompt;
    std::optional<std::uint64_t> seed;
    std::optional<double> pcs;
    std::optional<double> similarity;
    // verdict of the filter stage; required for synthetic entries
    std::optional<bool> kept;
    std::vector<InstructionPair> instruction_pairs;
    std::string concept_id;

    bool operator==(const DatasetEntry&) const = default;
};

DatasetEntry user_entry(const ImageRef& image, std::string concept_id);
/// Entry for a filtered synthetic sample.
DatasetEntry synthetic_entry(const FilterReportLine& line, std::string concept_id);

inline constexpr int kManifestVersion = 1;

struct DatasetManifest {
    std::vector<std::string> concept_ids;
    std::vector<DatasetEntry> entries;
    std::map<std::string, std::size_t> counts;
    // settings that produced the manifest (tree ids, thresholds, seeds)
    std::map<std::string, std::string> config;
    std::string config_digest;

    bool operator==(const DatasetManifest&) const = default;
};

/// SHA-256 over the sorted key=value lines.
std::string config_digest(const std::map<std::string, std::string>& config);

/// Union of the four sets, tagged by the list each entry came from. Every
/// synthetic entry must have kept == true (UnfilteredEntry otherwise) and
/// image refs must be unique (DuplicateSample).
DatasetManifest assemble(std::span<const DatasetEntry> user, std::span<const DatasetEntry> pos,
                         std::span<const DatasetEntry> easy, std::span<const DatasetEntry> hard,
                         std::map<std::string, std::string> config = {});

inline constexpr std::size_t kDefaultInstructionPairs = 2;

std::vector<ChatMessage> instruction_pairs_request(const DatasetEntry& entry, std::string_view concept_name,
                                                   std::size_t n_pairs);

/// Attaches n_pairs question/answer pairs written by the model. Positive
/// roles use the presence template, negative roles the absence template.
/// `concept_name` defaults to the entry's concept id.
DatasetEntry generate_instruction_pairs(DatasetEntry entry, ChatBackend& llm, std::size_t n_pairs,
                                        std::string_view concept_name = {});

std::vector<DatasetEntry> generate_instruction_pairs(std::vector<DatasetEntry> entries, ChatBackend& llm,
                                                     std::size_t n_pairs, std::string_view concept_name = {},
                                                     std::size_t threads = 1);

/// Header record followed by one record per entry.
std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

} // namespace catsynth
