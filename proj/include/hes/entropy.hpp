#pragma once

// Token entropy and the per-sample entropy metric family.
//
//   ES      = sum of H_t over all N tokens
//   AvgE    = ES / N
//   T_high  = the m = min(N, max(1, ceil(p N))) highest-entropy positions,
//             ties at the cut going to the earliest position
//   HES_rel = sum of H_t over T_high
//   AvgHE   = HES_rel / |T_high|
//   HES_abs = sum of H_t over tokens with H_t > tau (strict)
//
// All entropies are in nats.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hes {

inline constexpr double kDefaultHighEntropyFraction = 0.005;
inline constexpr double kDefaultAbsoluteThreshold = 1.6;

/// Tolerance on top-k probability mass above one.
inline constexpr double kMassTolerance = 1e-6;
/// Negative entropies within this distance of zero are clamped to zero.
inline constexpr double kNegativeEntropyTolerance = 1e-6;
/// Residual tail mass at or below this is treated as zero in lump mode.
inline constexpr double kTailMassFloor = 1e-12;

/// How probability mass missing from a truncated top-k list is handled.
enum class TailMode {
  Lump,    ///< fold the residual mass into one pseudo-symbol
  Ignore,  ///< sum only over the listed candidates
};

std::string_view to_string(TailMode mode);
TailMode parse_tail_mode(std::string_view text);

struct TokenObservation {
  std::optional<std::string> text;
  std::optional<std::int64_t> id;
  std::optional<double> entropy;
  /// (candidate token, log-probability). Empty means absent.
  std::vector<std::pair<std::string, double>> top_logprobs;
};

struct MetricConfig {
  double p = kDefaultHighEntropyFraction;
  double tau = kDefaultAbsoluteThreshold;
  TailMode tail_mode = TailMode::Lump;

  /// Throws InvalidArgument unless p is in (0, 1] and tau >= 0.
  void validate() const;

  friend bool operator==(const MetricConfig&, const MetricConfig&) = default;
};

/// Labels copied from the source record so score files are self-contained
/// inputs for selection and analysis.
struct SampleLabels {
  std::optional<bool> correct;
  std::optional<double> difficulty;
  std::optional<double> reward;

  friend bool operator==(const SampleLabels&, const SampleLabels&) = default;
};

struct SampleScore {
  std::string sample_id;
  std::string query_id;
  std::size_t n_tokens = 0;
  double es = 0.0;
  double avg_e = 0.0;
  double hes_rel = 0.0;
  double hes_abs = 0.0;
  double avg_he = 0.0;
  std::size_t high_count = 0;
  std::vector<std::size_t> high_indices;
  MetricConfig config;
  SampleLabels labels;

  friend bool operator==(const SampleScore&, const SampleScore&) = default;
};

struct SampleRecord;

/// Entropy of one token. A present `entropy` field wins and is returned
/// verbatim (after clamping tiny negative noise); otherwise the entropy is
/// computed from the top-k log-probabilities.
double compute_token_entropy(const TokenObservation& obs, TailMode tail_mode);

/// -sum p ln p over exp(logprobs), with the tail rule of `tail_mode`.
double entropy_from_logprobs(std::span<const double> logprobs, TailMode tail_mode);

/// Number of high-entropy tokens for a sequence of length n.
std::size_t high_entropy_count(std::size_t n, double p);

/// Positions of the top-p tokens, sorted ascending.
std::vector<std::size_t> identify_high_entropy_tokens(std::span<const double> entropies, double p);

/// Metric family over already-resolved token entropies.
SampleScore score_entropies(std::span<const double> entropies, const MetricConfig& config);

/// Resolves every token and scores the record. Token errors are rethrown
/// with the sample id and token position attached.
SampleScore score_sample(const SampleRecord& record, const MetricConfig& config = {});

/// Token entropies of a record, resolved with `tail_mode`.
std::vector<double> resolve_entropies(const SampleRecord& record, TailMode tail_mode);

}  // namespace hes
