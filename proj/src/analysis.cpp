#include "hes/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "hes/count_rule.hpp"
#include "hes/error.hpp"

namespace hes {

namespace {

GroupStats describe(std::span<const double> v) {
  GroupStats g;
  g.count = v.size();
  if (v.empty()) return g;
  const double n = static_cast<double>(v.size());
  g.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (const double x : v) ss += (x - g.mean) * (x - g.mean);
  g.stddev = std::sqrt(ss / n);
  return g;
}

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    // Positions i..j (0-based) share ranks i+1..j+1.
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double auc_rank(std::span<const double> correct, std::span<const double> incorrect) {
  if (correct.empty() || incorrect.empty()) {
    throw Error(ErrorCode::SingleClassInput, "AUC needs both correct and incorrect samples");
  }
  std::vector<double> all(incorrect.begin(), incorrect.end());
  all.insert(all.end(), correct.begin(), correct.end());
  const std::vector<double> ranks = average_ranks(all);
  const double n_inc = static_cast<double>(incorrect.size());
  const double n_cor = static_cast<double>(correct.size());
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < incorrect.size(); ++i) rank_sum += ranks[i];
  const double u = rank_sum - n_inc * (n_inc + 1.0) / 2.0;
  return u / (n_inc * n_cor);
}

double auc_pairwise(std::span<const double> correct, std::span<const double> incorrect) {
  if (correct.empty() || incorrect.empty()) {
    throw Error(ErrorCode::SingleClassInput, "AUC needs both correct and incorrect samples");
  }
  double wins = 0.0;
  for (const double i : incorrect) {
    for (const double c : correct) {
      if (i > c) {
        wins += 1.0;
      } else if (i == c) {
        wins += 0.5;
      }
    }
  }
  return wins / (static_cast<double>(incorrect.size()) * static_cast<double>(correct.size()));
}

SeparationReport separation_report(std::span<const SampleScore> scores, Metric metric) {
  SeparationReport report;
  report.metric = metric;
  std::vector<double> correct;
  std::vector<double> incorrect;
  for (const SampleScore& s : scores) {
    if (!s.labels.correct) {
      ++report.unlabeled;
      continue;
    }
    (*s.labels.correct ? correct : incorrect).push_back(metric_value(s, metric));
  }
  if (correct.empty() || incorrect.empty()) {
    throw Error(ErrorCode::SingleClassInput,
                "separation needs both correct and incorrect samples (correct=" +
                    std::to_string(correct.size()) + ", incorrect=" + std::to_string(incorrect.size()) + ")");
  }
  report.correct = describe(correct);
  report.incorrect = describe(incorrect);
  report.auc = auc_rank(correct, incorrect);
  return report;
}

double nearest_rank_percentile(std::span<const double> sorted, double percent) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyCorpus, "no values for percentile");
  if (!(percent >= 0.0 && percent <= 100.0)) {
    throw Error(ErrorCode::InvalidArgument, "percentile must be in [0, 100]");
  }
  const std::size_t n = sorted.size();
  const std::size_t rank = std::clamp<std::size_t>(guarded_ceil(percent / 100.0 * static_cast<double>(n)), 1, n);
  return sorted[rank - 1];
}

void EntropyDistribution::add_record(const SampleRecord& record, TailMode tail_mode) {
  for (const double h : resolve_entropies(record, tail_mode)) values_.push_back(h);
}

void EntropyDistribution::merge(const EntropyDistribution& other) {
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
}

DistributionReport EntropyDistribution::report(std::span<const double> percents, std::size_t bins,
                                               std::optional<double> hist_max) const {
  if (values_.empty()) throw Error(ErrorCode::EmptyCorpus, "no token entropies");
  if (bins == 0) throw Error(ErrorCode::InvalidArgument, "bins must be positive");
  std::vector<double> sorted = values_;
  std::sort(sorted.begin(), sorted.end());

  DistributionReport r;
  r.token_count = sorted.size();
  r.min = sorted.front();
  r.max = sorted.back();
  // Summed in sorted order so the mean does not depend on record order.
  r.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());

  const double hi = hist_max.value_or(r.max);
  r.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    r.bin_edges[i] = hi * static_cast<double>(i) / static_cast<double>(bins);
  }
  r.histogram.assign(bins, 0);
  for (const double v : sorted) {
    std::size_t b = 0;
    if (hi > 0.0) {
      const double pos = v / hi * static_cast<double>(bins);
      b = pos >= static_cast<double>(bins) ? bins - 1 : static_cast<std::size_t>(std::max(0.0, pos));
    }
    ++r.histogram[b];
  }
  for (const double p : percents) r.percentiles.emplace_back(p, nearest_rank_percentile(sorted, p));
  return r;
}

DistributionReport entropy_distribution(std::span<const double> entropies,
                                        std::span<const double> percents, std::size_t bins) {
  EntropyDistribution dist;
  for (const double h : entropies) dist.add(h);
  return dist.report(percents, bins);
}

HighEntropyTokenCounter::HighEntropyTokenCounter(double p, TailMode tail_mode)
    : p_(p), tail_mode_(tail_mode) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "high-entropy fraction p must be in (0, 1]");
  }
}

void HighEntropyTokenCounter::add_record(const SampleRecord& record) {
  const std::vector<double> entropies = resolve_entropies(record, tail_mode_);
  for (const std::size_t t : identify_high_entropy_tokens(entropies, p_)) {
    const TokenObservation& tok = record.tokens[t];
    if (tok.text) {
      ++counts_[*tok.text];
    } else if (tok.id) {
      ++counts_["#id:" + std::to_string(*tok.id)];
    } else {
      ++counts_["#unknown"];
    }
  }
}

std::vector<TokenCount> HighEntropyTokenCounter::table() const {
  std::vector<TokenCount> out;
  out.reserve(counts_.size());
  for (const auto& [token, count] : counts_) out.push_back({token, count});
  std::stable_sort(out.begin(), out.end(),
                   [](const TokenCount& a, const TokenCount& b) { return a.count > b.count; });
  return out;
}

std::vector<TokenCount> high_entropy_token_frequency(std::span<const SampleRecord> corpus, double p,
                                                     TailMode tail_mode) {
  HighEntropyTokenCounter counter(p, tail_mode);
  for (const SampleRecord& r : corpus) counter.add_record(r);
  return counter.table();
}

AgreementReport cross_scorer_agreement(std::span<const SampleScore> a, std::span<const SampleScore> b,
                                       double ratio, Metric metric) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::IdSetMismatch, "score sets differ in size (" + std::to_string(a.size()) +
                                              " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw Error(ErrorCode::EmptyCorpus, "no scores to compare");
  auto by_id = [](std::span<const SampleScore> s) {
    std::vector<const SampleScore*> v;
    for (const SampleScore& x : s) v.push_back(&x);
    std::sort(v.begin(), v.end(), [](auto* l, auto* r) { return l->sample_id < r->sample_id; });
    return v;
  };
  const auto sa = by_id(a);
  const auto sb = by_id(b);
  std::vector<double> va;
  std::vector<double> vb;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (sa[i]->sample_id != sb[i]->sample_id) {
      throw Error(ErrorCode::IdSetMismatch, "sample id sets differ").with_record(sa[i]->sample_id);
    }
    va.push_back(metric_value(*sa[i], metric));
    vb.push_back(metric_value(*sb[i], metric));
  }

  AgreementReport report;
  report.samples = va.size();
  const std::vector<double> ra = average_ranks(va);
  const std::vector<double> rb = average_ranks(vb);
  const GroupStats da = describe(ra);
  const GroupStats db = describe(rb);
  if (da.stddev == 0.0 || db.stddev == 0.0) {
    report.spearman = std::numeric_limits<double>::quiet_NaN();
  } else {
    double cov = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) cov += (ra[i] - da.mean) * (rb[i] - db.mean);
    cov /= static_cast<double>(ra.size());
    report.spearman = std::clamp(cov / (da.stddev * db.stddev), -1.0, 1.0);
  }

  SelectionSpec spec;
  spec.mode = SelectionMode::HighestHes;
  spec.metric = metric;
  spec.ratio = ratio;
  const SelectionManifest ma = sft_select(a, spec);
  const SelectionManifest mb = sft_select(b, spec);
  const std::set<std::string> top_a(ma.selected.begin(), ma.selected.end());
  const std::set<std::string> top_b(mb.selected.begin(), mb.selected.end());
  std::size_t inter = 0;
  for (const auto& id : top_a) inter += top_b.count(id);
  const std::size_t uni = top_a.size() + top_b.size() - inter;
  report.selected = top_a.size();
  report.overlap = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
  return report;
}

nlohmann::ordered_json to_json(const SeparationReport& r) {
  auto group = [](const GroupStats& g) {
    return nlohmann::ordered_json{{"count", g.count}, {"mean", g.mean}, {"std", g.stddev}};
  };
  nlohmann::ordered_json doc;
  doc["metric"] = to_string(r.metric);
  doc["auc"] = r.auc;
  doc["mean_gap"] = r.incorrect.mean - r.correct.mean;
  doc["correct"] = group(r.correct);
  doc["incorrect"] = group(r.incorrect);
  doc["unlabeled"] = r.unlabeled;
  return doc;
}

nlohmann::ordered_json to_json(const DistributionReport& r) {
  nlohmann::ordered_json doc;
  doc["token_count"] = r.token_count;
  doc["min"] = r.min;
  doc["max"] = r.max;
  doc["mean"] = r.mean;
  nlohmann::ordered_json pct = nlohmann::ordered_json::array();
  for (const auto& [p, v] : r.percentiles) pct.push_back({{"percentile", p}, {"value", v}});
  doc["percentiles"] = std::move(pct);
  doc["bin_edges"] = r.bin_edges;
  doc["histogram"] = r.histogram;
  return doc;
}

nlohmann::ordered_json to_json(std::span<const TokenCount> table) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const TokenCount& t : table) doc.push_back({{"token", t.token}, {"count", t.count}});
  return doc;
}

nlohmann::ordered_json to_json(const AgreementReport& r) {
  nlohmann::ordered_json doc;
  doc["spearman"] = number_or_null(r.spearman);
  doc["overlap"] = r.overlap;
  doc["samples"] = r.samples;
  doc["selected"] = r.selected;
  return doc;
}

}  // namespace hes
