#include "hes/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hes/count_rule.hpp"
#include "hes/error.hpp"
#include "hes/record.hpp"

namespace hes {

std::string_view to_string(TailMode mode) {
  return mode == TailMode::Lump ? "lump" : "ignore";
}

TailMode parse_tail_mode(std::string_view text) {
  if (text == "lump") return TailMode::Lump;
  if (text == "ignore") return TailMode::Ignore;
  throw Error(ErrorCode::InvalidArgument, "unknown tail mode '" + std::string(text) + "'");
}

void MetricConfig::validate() const {
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "high-entropy fraction p must be in (0, 1]");
  }
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::InvalidArgument, "absolute threshold tau must be a finite value >= 0");
  }
}

namespace {

template <class Range, class Proj>
double logprob_entropy(const Range& candidates, Proj logprob_of, TailMode tail_mode) {
  if (std::empty(candidates)) {
    throw Error(ErrorCode::EmptyDistribution, "token has neither entropy nor top_logprobs");
  }
  double mass = 0.0;
  double h = 0.0;
  for (const auto& c : candidates) {
    const double lp = logprob_of(c);
    if (std::isnan(lp)) throw Error(ErrorCode::SchemaViolation, "logprob is NaN");
    const double prob = std::exp(lp);
    mass += prob;
    if (prob > 0.0) h -= prob * lp;
  }
  if (mass > 1.0 + kMassTolerance) {
    throw Error(ErrorCode::MassExceedsOne,
                "top_logprobs mass " + std::to_string(mass) + " exceeds 1");
  }
  if (tail_mode == TailMode::Lump) {
    const double q = 1.0 - mass;
    if (q > kTailMassFloor) h -= q * std::log(q);
  }
  return std::max(0.0, h);
}

}  // namespace

double entropy_from_logprobs(std::span<const double> logprobs, TailMode tail_mode) {
  return logprob_entropy(logprobs, [](double lp) { return lp; }, tail_mode);
}

double compute_token_entropy(const TokenObservation& obs, TailMode tail_mode) {
  if (obs.entropy) {
    const double e = *obs.entropy;
    if (!std::isfinite(e)) throw Error(ErrorCode::SchemaViolation, "entropy is not finite");
    if (e < -kNegativeEntropyTolerance) {
      throw Error(ErrorCode::NegativeEntropy, "entropy " + std::to_string(e) + " is negative");
    }
    return std::max(0.0, e);
  }
  return logprob_entropy(
      obs.top_logprobs, [](const auto& candidate) { return candidate.second; }, tail_mode);
}

std::size_t high_entropy_count(std::size_t n, double p) { return count_for_fraction(p, n); }

std::vector<std::size_t> identify_high_entropy_tokens(std::span<const double> entropies, double p) {
  if (entropies.empty()) throw Error(ErrorCode::EmptySequence, "no tokens to rank");
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "high-entropy fraction p must be in (0, 1]");
  }
  const std::size_t n = entropies.size();
  const std::size_t m = high_entropy_count(n, p);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (m < n) {
    // Strict total order: higher entropy first, then earlier position.
    auto before = [&](std::size_t a, std::size_t b) {
      if (entropies[a] != entropies[b]) return entropies[a] > entropies[b];
      return a < b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                     before);
    order.resize(m);
    std::sort(order.begin(), order.end());
  }
  return order;
}

SampleScore score_entropies(std::span<const double> entropies, const MetricConfig& config) {
  config.validate();
  if (entropies.empty()) throw Error(ErrorCode::EmptySequence, "sample has no tokens");
  for (std::size_t t = 0; t < entropies.size(); ++t) {
    if (!std::isfinite(entropies[t]) || entropies[t] < 0.0) {
      throw Error(ErrorCode::InvalidArgument,
                  "entropy at token " + std::to_string(t) + " is negative or not finite");
    }
  }

  SampleScore score;
  score.config = config;
  score.n_tokens = entropies.size();

  double es = 0.0;
  double hes_abs = 0.0;
  for (const double h : entropies) {
    es += h;
    if (h > config.tau) hes_abs += h;
  }
  score.high_indices = identify_high_entropy_tokens(entropies, config.p);
  double hes_rel = 0.0;
  for (const std::size_t t : score.high_indices) hes_rel += entropies[t];

  score.es = es;
  score.avg_e = es / static_cast<double>(score.n_tokens);
  score.hes_rel = hes_rel;
  score.hes_abs = hes_abs;
  score.high_count = score.high_indices.size();
  score.avg_he = hes_rel / static_cast<double>(score.high_count);
  return score;
}

std::vector<double> resolve_entropies(const SampleRecord& record, TailMode tail_mode) {
  std::vector<double> entropies;
  entropies.reserve(record.tokens.size());
  for (std::size_t t = 0; t < record.tokens.size(); ++t) {
    try {
      entropies.push_back(compute_token_entropy(record.tokens[t], tail_mode));
    } catch (const Error& e) {
      throw Error(e.code(), e.message() + " [token " + std::to_string(t) + "]")
          .with_record(record.sample_id);
    }
  }
  return entropies;
}

SampleScore score_sample(const SampleRecord& record, const MetricConfig& config) {
  if (record.tokens.empty()) {
    throw Error(ErrorCode::EmptySequence, "sample has no tokens").with_record(record.sample_id);
  }
  const std::vector<double> entropies = resolve_entropies(record, config.tail_mode);
  SampleScore score = score_entropies(entropies, config);
  score.sample_id = record.sample_id;
  score.query_id = record.query_id;
  score.labels = record.labels;
  return score;
}

}  // namespace hes
