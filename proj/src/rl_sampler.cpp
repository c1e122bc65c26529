#include "hes/rl_sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>

#include "hes/count_rule.hpp"
#include "hes/rng.hpp"

namespace hes {

namespace {

constexpr std::array kStrategies = {
    BatchStrategy::PosHighNegRand,   BatchStrategy::PosRandNegRand, BatchStrategy::PosHighNegLow,
    BatchStrategy::PosRandNegLow,    BatchStrategy::PosLowNegRand,  BatchStrategy::PosLengthNegRand,
    BatchStrategy::PosDifficultyNegRand, BatchStrategy::FullBatch,
};

enum class PositiveRule { High, Low, Random, Length, Difficulty };
enum class NegativeRule { Random, Low };

PositiveRule positive_rule(BatchStrategy s) {
  switch (s) {
    case BatchStrategy::PosHighNegRand:
    case BatchStrategy::PosHighNegLow: return PositiveRule::High;
    case BatchStrategy::PosRandNegRand:
    case BatchStrategy::PosRandNegLow: return PositiveRule::Random;
    case BatchStrategy::PosLowNegRand: return PositiveRule::Low;
    case BatchStrategy::PosLengthNegRand: return PositiveRule::Length;
    case BatchStrategy::PosDifficultyNegRand: return PositiveRule::Difficulty;
    case BatchStrategy::FullBatch: break;
  }
  return PositiveRule::High;
}

NegativeRule negative_rule(BatchStrategy s) {
  return s == BatchStrategy::PosHighNegLow || s == BatchStrategy::PosRandNegLow
             ? NegativeRule::Low
             : NegativeRule::Random;
}

using Pool = std::vector<const SampleScore*>;

void sort_by_id(Pool& pool) {
  std::sort(pool.begin(), pool.end(),
            [](const SampleScore* a, const SampleScore* b) { return a->sample_id < b->sample_id; });
}

template <class Key>
void rank(Pool& pool, Key key, bool descending) {
  std::sort(pool.begin(), pool.end(), [&](const SampleScore* a, const SampleScore* b) {
    const double ka = key(*a);
    const double kb = key(*b);
    if (ka != kb) return descending ? ka > kb : ka < kb;
    return a->sample_id < b->sample_id;
  });
}

void shuffle(Pool& pool, std::uint64_t seed) {
  sort_by_id(pool);
  const std::vector<std::size_t> perm = seeded_permutation(pool.size(), seed);
  Pool out(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) out[i] = pool[perm[i]];
  pool = std::move(out);
}

void order_positives(Pool& pool, PositiveRule rule, std::uint64_t seed) {
  switch (rule) {
    case PositiveRule::High:
      rank(pool, [](const SampleScore& s) { return s.hes_rel; }, true);
      break;
    case PositiveRule::Low:
      rank(pool, [](const SampleScore& s) { return s.hes_rel; }, false);
      break;
    case PositiveRule::Random:
      shuffle(pool, seed);
      break;
    case PositiveRule::Length:
      rank(pool, [](const SampleScore& s) { return static_cast<double>(s.n_tokens); }, true);
      break;
    case PositiveRule::Difficulty: {
      std::vector<double> d;
      for (const SampleScore* s : pool) {
        if (!s->labels.difficulty) {
          throw Error(ErrorCode::MissingField, "difficulty strategy needs difficulty labels")
              .with_record(s->sample_id);
        }
        d.push_back(*s->labels.difficulty);
      }
      if (d.empty()) break;
      std::sort(d.begin(), d.end());
      const double mid = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
      rank(pool, [&](const SampleScore& s) { return std::abs(*s.labels.difficulty - mid); }, false);
      break;
    }
  }
}

void order_negatives(Pool& pool, NegativeRule rule, std::uint64_t seed) {
  if (rule == NegativeRule::Low) {
    rank(pool, [](const SampleScore& s) { return s.hes_rel; }, false);
  } else {
    shuffle(pool, seed);
  }
}

std::string normalize(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

}  // namespace

std::string_view to_string(BatchStrategy strategy) {
  switch (strategy) {
    case BatchStrategy::PosHighNegRand: return "pos_high_neg_rand";
    case BatchStrategy::PosRandNegRand: return "pos_rand_neg_rand";
    case BatchStrategy::PosHighNegLow: return "pos_high_neg_low";
    case BatchStrategy::PosRandNegLow: return "pos_rand_neg_low";
    case BatchStrategy::PosLowNegRand: return "pos_low_neg_rand";
    case BatchStrategy::PosLengthNegRand: return "pos_length_neg_rand";
    case BatchStrategy::PosDifficultyNegRand: return "pos_difficulty_neg_rand";
    case BatchStrategy::FullBatch: return "full_batch";
  }
  return "pos_high_neg_rand";
}

BatchStrategy parse_batch_strategy(std::string_view text) {
  const std::string s = normalize(text);
  for (const BatchStrategy b : kStrategies) {
    if (to_string(b) == s) return b;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown batch strategy '" + std::string(text) + "'");
}

std::span<const BatchStrategy> all_batch_strategies() { return kStrategies; }

void BatchSpec::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "batch fraction must be in (0, 1]");
  }
}

std::size_t target_batch_size(std::size_t group_size, double fraction) {
  std::size_t b = std::max<std::size_t>(2, guarded_ceil(fraction * static_cast<double>(group_size)));
  if (b % 2) ++b;
  return b;
}

double trajectory_reward(const SampleScore& t) {
  if (t.labels.reward) return *t.labels.reward;
  return t.labels.correct.value_or(false) ? 1.0 : 0.0;
}

std::vector<double> group_advantage(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw Error(ErrorCode::GroupTooSmall, "advantage needs at least two rewards");
  }
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  std::vector<double> adv(rewards.size(), 0.0);
  if (*lo == *hi) return adv;

  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double ss = 0.0;
  for (const double r : rewards) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / n);
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

Batch construct_batch(const RolloutGroup& group, const BatchSpec& spec) {
  spec.validate();
  if (group.trajectories.empty()) {
    throw Error(ErrorCode::EmptyGroup, "rollout group has no trajectories").with_record(group.query_id);
  }
  Batch batch;
  batch.query_id = group.query_id;
  batch.strategy = spec.strategy;
  batch.seed = spec.seed;
  batch.group_size = group.trajectories.size();

  Pool pos;
  Pool neg;
  std::vector<double> rewards;
  rewards.reserve(group.trajectories.size());
  for (const SampleScore& t : group.trajectories) {
    if (!t.labels.correct) {
      throw Error(ErrorCode::MissingCorrectLabel, "trajectory has no correct label")
          .with_record(t.sample_id);
    }
    (*t.labels.correct ? pos : neg).push_back(&t);
    rewards.push_back(trajectory_reward(t));
  }
  const std::vector<double> adv = group_advantage(rewards);

  if (spec.strategy == BatchStrategy::FullBatch) {
    batch.target_size = batch.group_size;
    sort_by_id(pos);
    sort_by_id(neg);
  } else {
    batch.target_size = target_batch_size(batch.group_size, spec.fraction);
    order_positives(pos, positive_rule(spec.strategy), derive_seed(spec.seed, group.query_id + "/pos"));
    order_negatives(neg, negative_rule(spec.strategy), derive_seed(spec.seed, group.query_id + "/neg"));
    if (pos.size() + neg.size() > batch.target_size) {
      const std::size_t quota = batch.target_size / 2;
      std::size_t take_pos = std::min(quota, pos.size());
      std::size_t take_neg = std::min(quota, neg.size());
      const std::size_t pos_short = quota - take_pos;
      const std::size_t neg_short = quota - take_neg;
      const std::size_t extra_neg = std::min(pos_short, neg.size() - take_neg);
      const std::size_t extra_pos = std::min(neg_short, pos.size() - take_pos);
      take_neg += extra_neg;
      take_pos += extra_pos;
      batch.backfilled = extra_neg + extra_pos;
      pos.resize(take_pos);
      neg.resize(take_neg);
    }
  }

  for (const SampleScore* t : pos) batch.positives.push_back(t->sample_id);
  for (const SampleScore* t : neg) batch.negatives.push_back(t->sample_id);
  for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
    const SampleScore& t = group.trajectories[i];
    if (std::find(pos.begin(), pos.end(), &t) != pos.end() ||
        std::find(neg.begin(), neg.end(), &t) != neg.end()) {
      batch.advantages[t.sample_id] = adv[i];
    }
  }
  return batch;
}

std::vector<RolloutGroup> group_rollouts(std::span<const SampleScore> scores) {
  std::map<std::string, RolloutGroup> by_query;
  for (const SampleScore& s : scores) {
    RolloutGroup& g = by_query[s.query_id];
    g.query_id = s.query_id;
    g.trajectories.push_back(s);
  }
  std::vector<RolloutGroup> groups;
  groups.reserve(by_query.size());
  for (auto& [_, g] : by_query) groups.push_back(std::move(g));
  return groups;
}

nlohmann::ordered_json batch_to_json(const Batch& batch) {
  nlohmann::ordered_json doc;
  doc["query_id"] = batch.query_id;
  doc["strategy"] = to_string(batch.strategy);
  doc["seed"] = batch.seed;
  doc["positives"] = batch.positives;
  doc["negatives"] = batch.negatives;
  nlohmann::ordered_json adv = nlohmann::ordered_json::object();
  for (const auto& [id, a] : batch.advantages) adv[id] = a;
  doc["advantages"] = std::move(adv);
  return doc;
}

nlohmann::ordered_json summary_to_json(const BatchSummary& s) {
  nlohmann::ordered_json doc;
  doc["groups_ok"] = s.groups_ok;
  doc["groups_failed"] = s.groups_failed;
  doc["quota_shortfalls"] = s.quota_shortfalls;
  doc["positives"] = s.positives;
  doc["negatives"] = s.negatives;
  doc["mean_positive_hes_rel"] = s.mean_positive_hes_rel;
  doc["mean_negative_hes_rel"] = s.mean_negative_hes_rel;
  doc["advantage_mean"] = s.advantage_mean;
  doc["advantage_std"] = s.advantage_std;
  doc["degenerate_groups"] = s.degenerate_groups;
  nlohmann::ordered_json ledger = nlohmann::ordered_json::array();
  for (const auto& e : s.ledger) ledger.push_back({{"query_id", e.query_id}, {"error", e.error}});
  doc["ledger"] = std::move(ledger);
  return doc;
}

BatchSummary batch_report(std::span<const RolloutGroup> groups, const BatchSpec& spec,
                          std::ostream* out, std::vector<Batch>* batches) {
  spec.validate();
  BatchSummary summary;
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  double adv_sum = 0.0;
  double adv_sq = 0.0;
  std::size_t adv_n = 0;

  for (const RolloutGroup& group : groups) {
    Batch batch;
    try {
      batch = construct_batch(group, spec);
    } catch (const Error& e) {
      ++summary.groups_failed;
      summary.ledger.push_back({group.query_id, e.what()});
      continue;
    }
    ++summary.groups_ok;
    if (batch.backfilled > 0 ||
        (spec.strategy != BatchStrategy::FullBatch &&
         batch.positives.size() + batch.negatives.size() < batch.target_size)) {
      ++summary.quota_shortfalls;
    }
    std::map<std::string, double> hes;
    for (const SampleScore& t : group.trajectories) hes[t.sample_id] = t.hes_rel;
    for (const auto& id : batch.positives) pos_sum += hes[id];
    for (const auto& id : batch.negatives) neg_sum += hes[id];
    summary.positives += batch.positives.size();
    summary.negatives += batch.negatives.size();
    bool degenerate = true;
    for (const auto& [_, a] : batch.advantages) {
      adv_sum += a;
      adv_sq += a * a;
      ++adv_n;
      if (a != 0.0) degenerate = false;
    }
    if (degenerate) ++summary.degenerate_groups;
    if (out) *out << batch_to_json(batch).dump() << '\n';
    if (batches) batches->push_back(std::move(batch));
  }
  if (summary.positives) summary.mean_positive_hes_rel = pos_sum / static_cast<double>(summary.positives);
  if (summary.negatives) summary.mean_negative_hes_rel = neg_sum / static_cast<double>(summary.negatives);
  if (adv_n) {
    summary.advantage_mean = adv_sum / static_cast<double>(adv_n);
    summary.advantage_std =
        std::sqrt(std::max(0.0, adv_sq / static_cast<double>(adv_n) - summary.advantage_mean * summary.advantage_mean));
  }
  if (out && !*out) throw Error(ErrorCode::IoFailure, "write failure");
  return summary;
}

}  // namespace hes
