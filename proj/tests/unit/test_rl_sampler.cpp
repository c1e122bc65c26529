#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hes/error.hpp"
#include "hes/rl_sampler.hpp"
#include "hes/rng.hpp"

using namespace hes;

namespace {

SampleScore traj(const std::string& id, double hes_rel, bool correct) {
  SampleScore s;
  s.sample_id = id;
  s.query_id = "q";
  s.hes_rel = hes_rel;
  s.n_tokens = 10;
  s.labels.correct = correct;
  return s;
}

RolloutGroup group_of(const std::vector<double>& pos, const std::vector<double>& neg) {
  RolloutGroup g;
  g.query_id = "q";
  for (std::size_t i = 0; i < pos.size(); ++i) g.trajectories.push_back(traj("p" + std::to_string(i), pos[i], true));
  for (std::size_t i = 0; i < neg.size(); ++i) g.trajectories.push_back(traj("n" + std::to_string(i), neg[i], false));
  return g;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_SUITE("rl_sampler") {

TEST_CASE("batch size rule") {
  CHECK(target_batch_size(8, 0.5) == 4);
  CHECK(target_batch_size(32, 0.5) == 16);
  CHECK(target_batch_size(7, 0.5) == 4);
  CHECK(target_batch_size(2, 0.1) == 2);
  CHECK(target_batch_size(10, 0.3) == 4);
  CHECK(target_batch_size(5, 1.0) == 6);
}

TEST_CASE("positive high, negative random") {
  const RolloutGroup g = group_of({9, 7, 5, 3}, {1, 2, 3, 4});
  BatchSpec spec;
  spec.seed = 7;
  const Batch b = construct_batch(g, spec);
  CHECK(b.target_size == 4);
  CHECK(as_set(b.positives) == std::set<std::string>{"p0", "p1"});
  REQUIRE(b.negatives.size() == 2);
  for (const auto& id : b.negatives) CHECK(id[0] == 'n');
  CHECK(construct_batch(g, spec).negatives == b.negatives);
  CHECK(b.backfilled == 0);
}

TEST_CASE("all-correct group backfills along the positive ordering") {
  const RolloutGroup g = group_of({1, 8, 3, 6, 5, 2, 7, 4}, {});
  BatchSpec spec;
  const Batch b = construct_batch(g, spec);
  CHECK(b.positives.size() + b.negatives.size() == 4);
  std::vector<std::string> all = b.positives;
  all.insert(all.end(), b.negatives.begin(), b.negatives.end());
  CHECK(as_set(all) == std::set<std::string>{"p1", "p6", "p3", "p4"});
  CHECK(b.backfilled == 2);
}

TEST_CASE("negative low picks the lowest incorrect") {
  const RolloutGroup g = group_of({5, 5, 5, 5}, {6, 4, 2, 1});
  BatchSpec spec;
  spec.strategy = BatchStrategy::PosHighNegLow;
  const Batch b = construct_batch(g, spec);
  CHECK(as_set(b.negatives) == std::set<std::string>{"n2", "n3"});
}

TEST_CASE("small group is returned whole") {
  const RolloutGroup g = group_of({1}, {2});
  BatchSpec spec;
  spec.fraction = 1.0;
  const Batch b = construct_batch(g, spec);
  CHECK(b.positives.size() == 1);
  CHECK(b.negatives.size() == 1);
}

TEST_CASE("full batch") {
  const RolloutGroup g = group_of({1, 2, 3}, {4, 5});
  BatchSpec spec;
  spec.strategy = BatchStrategy::FullBatch;
  const Batch b = construct_batch(g, spec);
  CHECK(b.positives.size() + b.negatives.size() == 5);
  CHECK(b.advantages.size() == 5);
}

TEST_CASE("empty group") {
  try {
    construct_batch(RolloutGroup{"q", {}}, BatchSpec{});
    FAIL("expected EmptyGroup");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyGroup);
  }
}

TEST_CASE("group advantage") {
  CHECK(group_advantage(std::vector<double>{1, 0, 0, 1}) == std::vector<double>{1, -1, -1, 1});
  CHECK(group_advantage(std::vector<double>{1, 1, 1, 1}) == std::vector<double>{0, 0, 0, 0});
  CHECK(group_advantage(std::vector<double>{2, 0}) == std::vector<double>{1, -1});
  try {
    group_advantage(std::vector<double>{1});
    FAIL("expected GroupTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GroupTooSmall);
  }
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> r(2 + rng.below(60));
    for (auto& x : r) x = rng.uniform(-3, 3);
    const auto a = group_advantage(r);
    double mean = 0, sq = 0;
    for (const double x : a) mean += x;
    mean /= static_cast<double>(a.size());
    for (const double x : a) sq += (x - mean) * (x - mean);
    CHECK(std::fabs(mean) <= 1e-9);
    CHECK(std::fabs(std::sqrt(sq / static_cast<double>(a.size())) - 1.0) <= 1e-9);
  }
}

TEST_CASE("reward falls back to the correctness label") {
  SampleScore s = traj("a", 0, true);
  CHECK(trajectory_reward(s) == 1.0);
  s.labels.correct = false;
  CHECK(trajectory_reward(s) == 0.0);
  s.labels.reward = 0.25;
  CHECK(trajectory_reward(s) == 0.25);
}

TEST_CASE("strategy names") {
  for (const auto s : all_batch_strategies()) {
    CHECK(parse_batch_strategy(to_string(s)) == s);
    std::string hyphen(to_string(s));
    std::replace(hyphen.begin(), hyphen.end(), '_', '-');
    CHECK(parse_batch_strategy(hyphen) == s);
  }
  CHECK(all_batch_strategies().size() == 8);
  CHECK_THROWS_AS(parse_batch_strategy("pos-mid"), Error);
}

TEST_CASE("seed changes only random slots") {
  Rng rng(4);
  RolloutGroup g;
  g.query_id = "q";
  for (int i = 0; i < 32; ++i) g.trajectories.push_back(traj("t" + std::to_string(i), rng.uniform(0, 9), i % 3 == 0));
  BatchSpec a;
  a.seed = 1;
  BatchSpec b = a;
  b.seed = 2;
  const Batch x = construct_batch(g, a);
  const Batch y = construct_batch(g, b);
  CHECK(x.positives == y.positives);
  a.strategy = b.strategy = BatchStrategy::PosRandNegLow;
  CHECK(construct_batch(g, a).negatives == construct_batch(g, b).negatives);
}

TEST_CASE("batch report isolates failing groups") {
  std::vector<RolloutGroup> groups{group_of({3, 2}, {1, 0}), RolloutGroup{"empty", {}}, group_of({1}, {2, 3})};
  groups[2].query_id = "q2";
  std::ostringstream out;
  std::vector<Batch> batches;
  const BatchSummary s = batch_report(groups, BatchSpec{}, &out, &batches);
  CHECK(s.groups_ok == 2);
  CHECK(s.groups_failed == 1);
  REQUIRE(s.ledger.size() == 1);
  CHECK(s.ledger[0].query_id == "empty");
  CHECK(batches.size() == 2);
  const std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);

  BatchSpec full;
  full.strategy = BatchStrategy::FullBatch;
  batches.clear();
  batch_report(groups, full, nullptr, &batches);
  for (const auto& b : batches) CHECK(b.positives.size() + b.negatives.size() == b.group_size);
}

TEST_CASE("group rollouts by query") {
  std::vector<SampleScore> s{traj("b1", 0, true), traj("a1", 0, true), traj("b2", 0, false)};
  s[0].query_id = s[2].query_id = "b";
  s[1].query_id = "a";
  const auto g = group_rollouts(s);
  REQUIRE(g.size() == 2);
  CHECK(g[0].query_id == "a");
  CHECK(g[1].trajectories.size() == 2);
}

}  // TEST_SUITE
