#pragma once

// Seeded synthetic corpora with controlled entropy profiles.
//
// Each sample gets a base length, then a number of entropy spikes; each spike
// can extend the sample by a random number of tokens. Base tokens draw their
// entropy from the base distribution scaled by a per-sample level; spike
// tokens draw from a magnitude range that lies strictly above the base
// support, so the high-entropy set is known in advance whenever the spike
// count covers it. That prediction is written to the ledger.
//
// Seeds: query q (0-based) uses derive_seed(profile.seed, query_id), so
// shards of queries can be generated independently.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hes/record.hpp"

namespace hes {

enum class BaseKind { Constant, Uniform, Exponential };

struct BaseEntropy {
  BaseKind kind = BaseKind::Uniform;
  double value = 0.1;  ///< constant
  double low = 0.0;    ///< uniform
  double high = 1.0;   ///< uniform
  double rate = 1.0;   ///< exponential
  /// Exponential draws at or above cap are redrawn; infinity disables truncation.
  double cap = std::numeric_limits<double>::infinity();
  /// Per-sample multiplicative level, uniform in [level_min, level_max].
  double level_min = 1.0;
  double level_max = 1.0;

  /// Supremum of any base entropy the profile can produce.
  double support_max() const;
};

struct SpikeModel {
  /// Expected spikes per correct sample; incorrect samples use mean * incorrect_multiplier.
  double mean_count = 0.0;
  /// Poisson counts when true, otherwise round(mean) exactly.
  bool poisson = false;
  double incorrect_multiplier = 1.0;
  double magnitude_min = 5.0;
  double magnitude_max = 5.0;
  /// Tokens appended to the sample per spike, uniform in [tokens_min, tokens_max].
  std::size_t tokens_min = 0;
  std::size_t tokens_max = 0;
  /// Spike token texts, drawn uniformly; "<fork>" when empty.
  std::vector<std::string> planted_texts;
};

struct GeneratorProfile {
  std::uint64_t seed = 0;
  std::size_t n_queries = 10;
  std::size_t candidates_per_query = 4;
  std::size_t min_tokens = 100;
  std::size_t max_tokens = 100;
  BaseEntropy base;
  SpikeModel spikes;
  double p_correct = 0.5;
  /// 0 writes the entropy field; K > 0 writes top-K logprobs instead.
  std::size_t top_logprobs = 0;
  /// Fraction p used for the ledger's predicted high-entropy set.
  double ledger_p = 0.005;

  /// Throws InvalidProfile.
  void validate() const;
};

nlohmann::json profile_to_json(const GeneratorProfile& profile);
GeneratorProfile profile_from_json(const nlohmann::json& doc);

struct PlantedSpike {
  std::size_t position = 0;
  double magnitude = 0.0;
  std::string text;
};

struct LedgerEntry {
  std::string sample_id;
  std::string query_id;
  bool correct = false;
  std::size_t n_tokens = 0;
  std::vector<PlantedSpike> spikes;  ///< ascending by position
  /// Present when the profile makes the high-entropy set analytically certain.
  std::optional<double> expected_hes_rel;
  std::optional<std::vector<std::size_t>> expected_high_indices;
};

std::string ledger_to_json(const LedgerEntry& entry);

struct GeneratedSample {
  SampleRecord record;
  LedgerEntry ledger;
};

/// Streams samples query by query.
class CorpusGenerator {
 public:
  explicit CorpusGenerator(GeneratorProfile profile);

  std::optional<GeneratedSample> next();

 private:
  void fill_query();

  GeneratorProfile profile_;
  std::size_t query_ = 0;
  std::vector<GeneratedSample> pending_;
  std::size_t cursor_ = 0;
};

std::vector<GeneratedSample> generate(const GeneratorProfile& profile);

struct GenerateStats {
  std::size_t samples = 0;
  std::size_t tokens = 0;
  std::size_t bytes = 0;
};

/// Writes the corpus (and optionally the ledger). Stops early, at a sample
/// boundary, once `max_bytes` of corpus have been written.
GenerateStats write_generated(const GeneratorProfile& profile, const std::filesystem::path& corpus,
                              const std::optional<std::filesystem::path>& ledger = std::nullopt,
                              std::optional<std::size_t> max_bytes = std::nullopt);

/// Zero-padded ids so that lexicographic order matches generation order.
std::string synth_query_id(std::size_t query);
std::string synth_sample_id(std::size_t query, std::size_t candidate);

}  // namespace hes
