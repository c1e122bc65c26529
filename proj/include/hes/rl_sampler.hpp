#pragma once

// RL batch construction from rollout groups and GRPO group-relative
// advantages.
//
// A rollout group holds the G trajectories sampled for one query. Correct
// trajectories form the positive pool Y+, incorrect ones the negative pool
// Y-. A batch takes B = max(2, ceil(rho_S * G)) trajectories, rounded up to
// even, half from each pool, each half chosen by the strategy's rule for
// that side.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hes/entropy.hpp"
#include "hes/error.hpp"

namespace hes {

enum class BatchStrategy {
  PosHighNegRand,
  PosRandNegRand,
  PosHighNegLow,
  PosRandNegLow,
  PosLowNegRand,
  PosLengthNegRand,
  PosDifficultyNegRand,
  FullBatch,
};

/// Canonical names use underscores ("pos_high_neg_rand"); hyphens are accepted on input.
std::string_view to_string(BatchStrategy strategy);
BatchStrategy parse_batch_strategy(std::string_view text);
std::span<const BatchStrategy> all_batch_strategies();

inline constexpr double kDefaultBatchFraction = 0.5;

struct BatchSpec {
  BatchStrategy strategy = BatchStrategy::PosHighNegRand;
  double fraction = kDefaultBatchFraction;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Trajectories are SampleScores whose labels carry correctness and reward.
/// A missing reward falls back to 1 for correct and 0 for incorrect.
struct RolloutGroup {
  std::string query_id;
  std::vector<SampleScore> trajectories;
};

struct Batch {
  std::string query_id;
  BatchStrategy strategy = BatchStrategy::PosHighNegRand;
  std::uint64_t seed = 0;
  std::size_t group_size = 0;
  std::size_t target_size = 0;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  /// Advantages of the batch members, normalized over the whole group.
  std::map<std::string, double> advantages;
  /// Slots filled from the other pool because one pool was short.
  std::size_t backfilled = 0;
};

/// B before pool sizes are considered.
std::size_t target_batch_size(std::size_t group_size, double fraction);

Batch construct_batch(const RolloutGroup& group, const BatchSpec& spec);

/// (r - mean) / std with the population std; all zeros when every reward is equal.
std::vector<double> group_advantage(std::span<const double> rewards);

double trajectory_reward(const SampleScore& trajectory);

/// Groups a score table by query_id (ordered by query_id).
std::vector<RolloutGroup> group_rollouts(std::span<const SampleScore> scores);

struct BatchSummary {
  std::size_t groups_ok = 0;
  std::size_t groups_failed = 0;
  std::size_t quota_shortfalls = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double mean_positive_hes_rel = 0.0;
  double mean_negative_hes_rel = 0.0;
  double advantage_mean = 0.0;
  double advantage_std = 0.0;
  std::size_t degenerate_groups = 0;
  struct LedgerEntry {
    std::string query_id;
    std::string error;
  };
  std::vector<LedgerEntry> ledger;
};

nlohmann::ordered_json batch_to_json(const Batch& batch);
nlohmann::ordered_json summary_to_json(const BatchSummary& summary);

/// Builds one batch per group. Failing groups go to the summary ledger and
/// the stream continues. Batches are written one JSON line each when `out` is set.
BatchSummary batch_report(std::span<const RolloutGroup> groups, const BatchSpec& spec,
                          std::ostream* out = nullptr, std::vector<Batch>* batches = nullptr);

}  // namespace hes
