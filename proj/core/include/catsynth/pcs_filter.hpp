// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "catsynth/backends.hpp"
#include "catsynth/content_store.hpp"
#include "catsynth/image.hpp"
#include "catsynth/prompt_synth.hpp"

namespace catsynth {

inline constexpr double kPositiveThreshold = 0.3;
inline constexpr double kHardNegativeThreshold = 0.1;
inline constexpr double kTextImageThreshold = 0.2;
inline constexpr int kDefaultPatchSize = 14;
inline constexpr double kZeroNormEpsilon = 1e-12;

enum class PerturbMode { ShuffleSelf, MixWithReference };

std::string_view to_string(PerturbMode mode) noexcept;
std::optional<PerturbMode> perturb_mode_from_string(std::string_view s) noexcept;

struct PerturbConfig {
    int patch_size = kDefaultPatchSize;
    PerturbMode mode = PerturbMode::ShuffleSelf;
    std::uint64_t seed = 0;
    double shuffle_fraction = 0.5;

    /// Throws BadFraction / Precondition.
    void validate() const;
};

/// Default threshold per role: positive 0.3, hard negative 0.1.
double default_threshold(SampleRole role);

/// Perturbs ceil(fraction * P) of the P patches of the image (after padding
/// to a multiple of the patch size by edge replication).
///
/// ShuffleSelf: the chosen positions are visited in seeded random order and
/// each receives the patch of the next one in that order (a cyclic shift), so
/// every chosen patch moves whenever two or more are chosen.
/// MixWithReference: the chosen positions take the reference's patch at the
/// same position; the padded reference must have the same grid.
Image patch_shuffle(const Image& image, const PerturbConfig& config, const Image* reference = nullptr);

ImageRef patch_shuffle(const ImageRef& image, const PerturbConfig& config, ContentStore& store,
                       const ImageRef* reference = nullptr);

/// Nearest-neighbour resize; used to bring references onto a sample's grid.
Image resize_nearest(const Image& image, int width, int height);

/// Cosine similarity clamped to [-1, 1].
double cosine(std::span<const double> a, std::span<const double> b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct ReferenceSimilarity {
    std::string reference;
    double s_original = 0.0;
    double s_disturbed = 0.0;
};

struct PCSRecord {
    ImageRef sample;
    double s_original = 0.0;
    double s_disturbed = 0.0;
    double pcs = 0.0;
    double threshold = 0.0;
    bool kept = false;
    std::vector<ReferenceSimilarity> per_reference;
};

/// Per-sample perturbation seed: config seed XOR digest of the content address.
std::uint64_t sample_seed(std::uint64_t global_seed, const ImageRef& sample);

/// S_o / S_d are means over references of cos(F_o, F_r) / cos(F_d, F_r);
/// pcs = S_o - S_d; kept = pcs > threshold.
PCSRecord pcs_score(const ImageRef& sample, std::span<const ImageRef> references, EmbeddingBackend& encoder,
                    const PerturbConfig& config, ContentStore& store, double threshold);

/// pcs_score over a batch; output order follows input order for any thread count.
std::vector<PCSRecord> pcs_score_batch(std::span<const ImageRef> samples, std::span<const ImageRef> references,
                                       EmbeddingBackend& encoder, const PerturbConfig& config, ContentStore& store,
                                       double threshold, std::size_t threads = 1);

/// Re-decides kept against the role's threshold (or the override) and
/// partitions by pcs > tau, preserving input order in both halves.
std::pair<std::vector<PCSRecord>, std::vector<PCSRecord>> filter_pcs(std::vector<PCSRecord> records, SampleRole role,
                                                                     std::optional<double> tau_override = {});

struct TextImageRecord {
    ImageRef sample;
    std::string prompt;
    double similarity = 0.0;
    double threshold = 0.0;
    bool kept = false;
};

struct PromptedSample {
    ImageRef image;
    std::string prompt;
};

/// Keeps samples whose image embedding is at least tau_text cosine-similar to
/// the embedding of their own generating prompt.
std::pair<std::vector<TextImageRecord>, std::vector<TextImageRecord>> filter_easy_negative(
    std::span<const PromptedSample> samples, EmbeddingBackend& encoder, double tau_text = kTextImageThreshold,
    std::size_t threads = 1);

} // namespace catsynth
