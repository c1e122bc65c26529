#pragma once

// Corpus-level selection: SFT percentile selection and its baselines, RFT
// per-query and global-pool selection, and length-stratified selection.
//
// Count rule everywhere: m = min(M, max(1, ceil(ratio * M))). Every ranking
// breaks ties by ascending sample_id, so results do not depend on input order.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hes/entropy.hpp"
#include "hes/manifest.hpp"

namespace hes {

enum class Metric { HesRel, HesAbs, Es, AvgE, AvgHe };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);
double metric_value(const SampleScore& score, Metric metric);

enum class SelectionMode { HighestHes, LowestHes, Random, Length, Difficulty };

std::string_view to_string(SelectionMode mode);
/// Accepts "highest_hes", "highest-hes" and the short form "highest".
SelectionMode parse_selection_mode(std::string_view text);

struct SelectionSpec {
  SelectionMode mode = SelectionMode::HighestHes;
  /// Exactly one of ratio (in (0, 1]) and budget (absolute count) is used; ratio wins if both are set.
  std::optional<double> ratio = 0.2;
  std::optional<std::size_t> budget;
  Metric metric = Metric::HesRel;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> strata;

  /// Throws InvalidArgument on an unusable spec (random mode without seed,
  /// ratio out of range, neither ratio nor budget).
  void validate() const;
  std::size_t target_count(std::size_t population) const;
};

/// Canonical settings for the two SFT experiments.
inline constexpr double kEfficiencyRatio = 0.2;
inline constexpr double kDenoisingRatio = 0.8;

SelectionManifest sft_select(std::span<const SampleScore> scores, const SelectionSpec& spec,
                             std::string corpus_digest = {});

enum class RftScope { PerQuery, Global };

std::string_view to_string(RftScope scope);
RftScope parse_rft_scope(std::string_view text);

struct RftSpec {
  RftScope scope = RftScope::PerQuery;
  std::size_t k = 2;
  /// Candidates generated upstream per query; recorded for audit, checked against k.
  std::optional<std::size_t> candidates;
  /// Global scope only; defaults to the per-query-equivalent budget.
  std::optional<std::size_t> budget;

  void validate() const;
};

/// Y+ = correct samples of each query; keeps the min(k, |Y+|) highest hes_rel per query.
SelectionManifest rft_per_query_select(std::span<const SampleScore> scores, std::size_t k,
                                       std::string corpus_digest = {});

/// Sum over queries of min(k, |Y+|).
std::size_t rft_equivalent_budget(std::span<const SampleScore> scores, std::size_t k);

/// Pools the correct samples of all queries and keeps the min(budget, |pool|)
/// highest hes_rel. Without a budget, uses rft_equivalent_budget(k).
SelectionManifest rft_global_select(std::span<const SampleScore> scores,
                                    std::optional<std::size_t> budget, std::size_t k,
                                    std::string corpus_digest = {});

SelectionManifest rft_select(std::span<const SampleScore> scores, const RftSpec& spec,
                             std::string corpus_digest = {});

/// Splits samples into `groups` equal-count strata by n_tokens (shortest
/// first, ties by sample_id) and runs sft_select in each.
std::vector<std::vector<SampleScore>> length_strata(std::span<const SampleScore> scores,
                                                    std::size_t groups);
std::vector<SelectionManifest> stratified_select(std::span<const SampleScore> scores,
                                                 std::size_t groups, const SelectionSpec& spec,
                                                 std::string corpus_digest = {});

/// Re-derives a manifest from its embedded strategy and params.
SelectionManifest rederive(const SelectionManifest& manifest, std::span<const SampleScore> scores);

}  // namespace hes
