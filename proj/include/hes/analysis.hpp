#pragma once

// Corpus statistics: correct/incorrect separation of a metric (AUC),
// token-entropy distribution with nearest-rank percentiles, frequency of
// high-entropy token texts, and agreement between two scorers.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hes/entropy.hpp"
#include "hes/record.hpp"
#include "hes/selection.hpp"

namespace hes {

struct GroupStats {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  ///< population
};

struct SeparationReport {
  Metric metric = Metric::HesRel;
  GroupStats correct;
  GroupStats incorrect;
  /// P(random incorrect sample scores above a random correct one), ties count 1/2.
  double auc = 0.5;
  std::size_t unlabeled = 0;
};

/// Mann-Whitney AUC via midranks, O((n+m) log(n+m)).
double auc_rank(std::span<const double> correct, std::span<const double> incorrect);
/// Exhaustive pairwise AUC, O(n m). Reference implementation.
double auc_pairwise(std::span<const double> correct, std::span<const double> incorrect);

/// Samples without a correct label are skipped and counted.
SeparationReport separation_report(std::span<const SampleScore> scores, Metric metric);

/// Nearest-rank percentile (percent in [0, 100]) of ascending-sorted data.
double nearest_rank_percentile(std::span<const double> sorted, double percent);

struct DistributionReport {
  std::size_t token_count = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  /// bins + 1 ascending edges; the last bin is closed on the right.
  std::vector<double> bin_edges;
  std::vector<std::size_t> histogram;
  std::vector<std::pair<double, double>> percentiles;  ///< (percent, value)
};

/// Collects token entropies; the report sorts them once. Memory is one
/// double per token.
class EntropyDistribution {
 public:
  void add(double entropy) { values_.push_back(entropy); }
  void add_record(const SampleRecord& record, TailMode tail_mode);
  void merge(const EntropyDistribution& other);
  std::size_t size() const noexcept { return values_.size(); }

  /// Histogram spans [0, hist_max] (hist_max defaults to the observed
  /// maximum); values beyond the range land in the last bin.
  DistributionReport report(std::span<const double> percents, std::size_t bins,
                            std::optional<double> hist_max = std::nullopt) const;

 private:
  std::vector<double> values_;
};

DistributionReport entropy_distribution(std::span<const double> entropies,
                                        std::span<const double> percents, std::size_t bins);

struct TokenCount {
  std::string token;
  std::size_t count = 0;

  friend bool operator==(const TokenCount&, const TokenCount&) = default;
};

/// Counts the texts of every sample's high-entropy tokens at fraction p.
/// Tokens without text fall back to "#id:<id>", or "#unknown" without either.
class HighEntropyTokenCounter {
 public:
  HighEntropyTokenCounter(double p, TailMode tail_mode);
  void add_record(const SampleRecord& record);
  /// Count descending, then token ascending.
  std::vector<TokenCount> table() const;

 private:
  double p_;
  TailMode tail_mode_;
  std::map<std::string, std::size_t> counts_;
};

std::vector<TokenCount> high_entropy_token_frequency(std::span<const SampleRecord> corpus, double p,
                                                     TailMode tail_mode = TailMode::Lump);

struct AgreementReport {
  double spearman = 0.0;  ///< NaN when either side has constant scores
  double overlap = 0.0;   ///< Jaccard of the two top-ratio selections
  std::size_t samples = 0;
  std::size_t selected = 0;
};

/// Average ranks of `values` (1-based; ties share the mean rank).
std::vector<double> average_ranks(std::span<const double> values);

AgreementReport cross_scorer_agreement(std::span<const SampleScore> a, std::span<const SampleScore> b,
                                       double ratio, Metric metric = Metric::HesRel);

nlohmann::ordered_json to_json(const SeparationReport& report);
nlohmann::ordered_json to_json(const DistributionReport& report);
nlohmann::ordered_json to_json(std::span<const TokenCount> table);
nlohmann::ordered_json to_json(const AgreementReport& report);

}  // namespace hes
