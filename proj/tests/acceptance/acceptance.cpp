// Acceptance suite: one PASS/FAIL line per primary criterion.
//
// Usage: hes_acceptance [--skip-throughput] [--throughput-bytes N]

#include <sys/resource.h>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hes/analysis.hpp"
#include "hes/corpus_io.hpp"
#include "hes/entropy.hpp"
#include "hes/manifest.hpp"
#include "hes/rl_sampler.hpp"
#include "hes/rng.hpp"
#include "hes/selection.hpp"
#include "hes/synth.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kDir = fs::temp_directory_path() / "hes_acceptance";

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail = why;
    }
  }
};

int g_failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!o.pass) ++g_failures;
  std::printf("%s  %-22s %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HES_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ------------------------------------------------------------ metric oracle

Outcome metric_oracle() {
  Outcome o;
  const auto start = Clock::now();
  hes::Rng rng(20240601);
  std::size_t max_n = 0;
  for (int sample = 0; sample < 1000; ++sample) {
    const std::size_t n = 1 + rng.below(5000);
    max_n = std::max(max_n, n);
    std::vector<double> h(n);
    const int kind = static_cast<int>(rng.below(4));
    for (auto& x : h) {
      switch (kind) {
        case 0: x = rng.exponential(1.0); break;
        case 1: x = rng.uniform(0, 3); break;
        case 2: x = std::round(rng.uniform(0, 4) * 2) / 2; break;  // heavy ties
        default: x = rng.bernoulli(0.02) ? rng.uniform(2, 6) : rng.uniform(0, 0.5); break;
      }
    }
    hes::MetricConfig c;
    const double ps[] = {0.005, 0.01, 0.05, 0.2, 1.0};
    c.p = ps[rng.below(5)];
    c.tau = rng.uniform(0, 3);
    const hes::SampleScore s = hes::score_entropies(h, c);
    const std::size_t num = static_cast<std::size_t>(std::llround(c.p * 1000));
    const auto ref = oracle::score(h, oracle::count_rule(n, num, 1000), c.tau);
    o.require(s.high_indices == ref.high_indices, "high_indices differ on sample " + std::to_string(sample));
    o.require(oracle::rel_close(s.es, ref.es) && oracle::rel_close(s.avg_e, ref.avg_e) &&
                  oracle::rel_close(s.hes_rel, ref.hes_rel) && oracle::rel_close(s.hes_abs, ref.hes_abs) &&
                  oracle::rel_close(s.avg_he, ref.avg_he),
              "sum outside 1e-9 on sample " + std::to_string(sample));
  }
  const double secs = seconds_since(start);
  o.require(secs < 10.0, "runtime " + fmt("%.2f", secs) + "s >= 10s");
  if (o.pass) o.detail = "1000 samples, N<=" + std::to_string(max_n) + ", exact indices, rel err<=1e-9, " + fmt("%.2f", secs) + "s<10s";
  return o;
}

// ------------------------------------------------------------ identities

Outcome identities() {
  Outcome o;
  std::size_t samples = 0, corpora = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    hes::GeneratorProfile p;
    p.seed = seed;
    p.n_queries = 50;
    p.candidates_per_query = 8;
    p.min_tokens = 1;
    p.max_tokens = 2000;
    p.base.kind = seed % 3 == 0 ? hes::BaseKind::Exponential : seed % 3 == 1 ? hes::BaseKind::Uniform : hes::BaseKind::Constant;
    p.base.cap = 1.5;
    p.spikes.mean_count = static_cast<double>(seed);
    p.spikes.poisson = true;
    p.spikes.incorrect_multiplier = 2;
    p.spikes.magnitude_min = 2;
    p.spikes.magnitude_max = 6;
    p.top_logprobs = seed % 2 == 0 ? 5 : 0;
    ++corpora;
    for (const auto& tail : {hes::TailMode::Lump, hes::TailMode::Ignore}) {
      for (const double frac : {0.005, 0.1, 0.5}) {
        hes::MetricConfig c;
        c.p = frac;
        c.tail_mode = tail;
        hes::CorpusGenerator gen(p);
        while (auto g = gen.next()) {
          const hes::SampleScore s = hes::score_sample(g->record, c);
          ++samples;
          o.require(oracle::rel_close(s.es, s.avg_e * static_cast<double>(s.n_tokens)), "ES != N*AvgE for " + s.sample_id);
          o.require(oracle::rel_close(s.hes_rel, s.avg_he * static_cast<double>(s.high_count)),
                    "HES_rel != AvgHE*|T_high| for " + s.sample_id);
          o.require(s.high_count == s.high_indices.size() && s.high_count == hes::high_entropy_count(s.n_tokens, c.p),
                    "high_count mismatch for " + s.sample_id);
          o.require(s.hes_rel >= 0 && s.hes_rel <= s.es * (1 + 1e-12) && s.hes_abs >= 0 && s.hes_abs <= s.es * (1 + 1e-12),
                    "bounds violated for " + s.sample_id);
        }
      }
    }
  }
  if (o.pass) o.detail = std::to_string(samples) + " scored samples over " + std::to_string(corpora) + " corpora, rel err<=1e-9";
  return o;
}

// ------------------------------------------------------------ token rule

Outcome token_rule() {
  Outcome o;
  const std::size_t ns[] = {1, 10, 199, 200, 201};
  const std::size_t ms[] = {1, 1, 1, 1, 2};
  std::string got;
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t m = hes::high_entropy_count(ns[i], 0.005);
    got += (i ? "," : "") + std::to_string(m);
    o.require(m == ms[i], "N=" + std::to_string(ns[i]) + " gave m=" + std::to_string(m));
    const std::vector<double> flat(ns[i], 0.5);
    const auto idx = hes::identify_high_entropy_tokens(flat, 0.005);
    std::vector<std::size_t> earliest(ms[i]);
    for (std::size_t k = 0; k < ms[i]; ++k) earliest[k] = k;
    o.require(idx == earliest, "ties did not resolve to earliest positions at N=" + std::to_string(ns[i]));
  }
  if (o.pass) o.detail = "p=0.005, N={1,10,199,200,201} -> m={" + got + "}, ties to earliest";
  return o;
}

// ------------------------------------------------------------ selection

std::string score_bytes(const fs::path& corpus, std::size_t workers) {
  std::ifstream in(corpus, std::ios::binary);
  std::ostringstream out;
  hes::ScoreRunOptions opts;
  opts.workers = workers;
  hes::score_corpus(in, out, hes::MetricConfig{}, opts);
  return out.str();
}

std::vector<hes::SampleScore> parse_scores(const std::string& bytes) {
  std::istringstream in(bytes);
  return hes::read_scores(in);
}

Outcome selection() {
  Outcome o;
  const auto start = Clock::now();
  hes::GeneratorProfile p;
  p.seed = 99;
  p.n_queries = 1250;
  p.candidates_per_query = 8;
  p.min_tokens = 50;
  p.max_tokens = 600;
  p.spikes.mean_count = 3;
  p.spikes.poisson = true;
  p.spikes.incorrect_multiplier = 2;
  p.spikes.magnitude_min = 2;
  p.spikes.magnitude_max = 5;
  const fs::path corpus = kDir / "selection_corpus.jsonl";
  hes::write_generated(p, corpus);

  hes::SelectionSpec hi;
  hi.ratio = 0.2;
  hes::SelectionSpec lo = hi;
  lo.mode = hes::SelectionMode::LowestHes;

  std::vector<hes::SelectionManifest> reference;
  std::vector<hes::SampleScore> scores;
  for (const std::size_t workers : {1, 4, 16}) {
    const std::string bytes = score_bytes(corpus, workers);
    const auto table = parse_scores(bytes);
    const std::string digest = hes::bytes_digest(bytes);
    std::vector<hes::SelectionManifest> ms{hes::sft_select(table, hi, digest), hes::sft_select(table, lo, digest)};
    if (reference.empty()) {
      reference = ms;
      scores = table;
    }
    o.require(ms == reference, "manifests differ at workers=" + std::to_string(workers));
  }
  o.require(scores.size() == 10000, "expected 10000 samples, got " + std::to_string(scores.size()));

  const auto top = as_set(reference[0].selected);
  const auto bottom = as_set(reference[1].selected);
  std::size_t shared = 0;
  for (const auto& id : bottom) shared += top.count(id);
  o.require(shared == 0, std::to_string(shared) + " ids in both highest and lowest");
  o.require(top.size() == 2000 && bottom.size() == 2000, "wrong selection size");

  for (const auto& s : scores) {
    if (top.count(s.sample_id)) o.require(s.hes_rel >= *reference[0].threshold, "selected below threshold");
    else o.require(s.hes_rel <= *reference[0].threshold, "rejected above threshold");
    if (bottom.count(s.sample_id)) o.require(s.hes_rel <= *reference[1].threshold, "lowest selection above threshold");
    else o.require(s.hes_rel >= *reference[1].threshold, "lowest rejection below threshold");
  }

  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto perm = hes::seeded_permutation(scores.size(), seed);
    std::vector<hes::SampleScore> shuffled(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) shuffled[i] = scores[perm[i]];
    std::ostringstream out;
    hes::write_scores(shuffled, out);
    const auto reread = parse_scores(out.str());
    for (std::size_t k = 0; k < 2; ++k) {
      hes::SelectionManifest m = hes::sft_select(reread, k == 0 ? hi : lo, hes::bytes_digest(out.str()));
      hes::SelectionManifest ref = reference[k];
      m.corpus_digest.clear();
      ref.corpus_digest.clear();
      o.require(m == ref, "manifest changed under record permutation " + std::to_string(seed));
    }
  }
  const double secs = seconds_since(start);
  o.require(secs < 30.0, "runtime " + fmt("%.2f", secs) + "s >= 30s");
  if (o.pass)
    o.detail = "10000 samples, rho=0.2 disjoint, threshold sound, invariant to 3 permutations and workers 1/4/16, " +
               fmt("%.2f", secs) + "s<30s";
  return o;
}

// ------------------------------------------------------------ rft

Outcome rft() {
  Outcome o;
  hes::Rng rng(4242);
  std::vector<hes::SampleScore> scores;
  for (std::size_t q = 0; q < 1000; ++q) {
    // Vary the correct rate so queries with |Y+| below, at and above k all occur.
    const double rate = q % 10 == 0 ? 0.0 : q % 10 == 1 ? 0.05 : rng.uniform();
    for (std::size_t c = 0; c < 32; ++c) {
      hes::SampleScore s;
      s.query_id = hes::synth_query_id(q);
      s.sample_id = hes::synth_sample_id(q, c);
      s.hes_rel = std::round(rng.uniform(0, 50) * 4) / 4;
      s.labels.correct = rng.bernoulli(rate);
      scores.push_back(s);
    }
  }
  std::map<std::string, std::vector<const hes::SampleScore*>> positives;
  std::map<std::string, double> value;
  std::map<std::string, bool> correct;
  for (const auto& s : scores) {
    value[s.sample_id] = s.hes_rel;
    correct[s.sample_id] = *s.labels.correct;
    if (*s.labels.correct) positives[s.query_id].push_back(&s);
  }
  for (const std::size_t k : {2, 4, 8}) {
    hes::RftSpec spec;
    spec.k = k;
    spec.candidates = 32;
    const auto per = hes::rft_select(scores, spec);
    std::map<std::string, std::vector<std::string>> chosen;
    for (const auto& id : per.selected) chosen[id.substr(0, 8)].push_back(id);
    std::size_t expected_budget = 0;
    for (std::size_t q = 0; q < 1000; ++q) {
      const std::string qid = hes::synth_query_id(q);
      const std::size_t pool = positives.count(qid) ? positives[qid].size() : 0;
      const std::size_t want = std::min(k, pool);
      expected_budget += want;
      const auto& got = chosen[qid];
      o.require(got.size() == want, "k=" + std::to_string(k) + ": query " + qid + " kept " + std::to_string(got.size()));
      for (const auto& id : got) o.require(correct[id], "incorrect sample selected: " + id);
      // Dominance within the query.
      double lowest_in = 1e300;
      for (const auto& id : got) lowest_in = std::min(lowest_in, value[id]);
      const auto in = as_set(got);
      if (positives.count(qid))
        for (const auto* s : positives[qid])
          if (!in.count(s->sample_id)) o.require(s->hes_rel <= lowest_in, "per-query dominance violated in " + qid);
    }
    o.require(per.details.at("budget").get<std::size_t>() == expected_budget, "per-query budget mismatch");
    o.require(hes::rft_equivalent_budget(scores, k) == expected_budget, "equivalent budget mismatch");

    spec.scope = hes::RftScope::Global;
    const auto global = hes::rft_select(scores, spec);
    o.require(global.selected.size() == expected_budget,
              "k=" + std::to_string(k) + ": global default budget " + std::to_string(global.selected.size()) +
                  " != " + std::to_string(expected_budget));
    const auto in = as_set(global.selected);
    double lowest_in = 1e300;
    for (const auto& id : global.selected) {
      o.require(correct[id], "global selected an incorrect sample");
      lowest_in = std::min(lowest_in, value[id]);
    }
    for (const auto& [qid, pool] : positives)
      for (const auto* s : pool)
        if (!in.count(s->sample_id)) o.require(s->hes_rel <= lowest_in, "global dominance violated");
    o.require(global.threshold && *global.threshold == lowest_in, "global threshold is not the last admitted score");
  }
  if (o.pass) o.detail = "1000 queries x K=32, k in {2,4,8}: min(k,|Y+|), budget=sum min(k,|Y+|), dominance";
  return o;
}

// ------------------------------------------------------------ rl

bool is_random_positive(hes::BatchStrategy s) { return s == hes::BatchStrategy::PosRandNegRand || s == hes::BatchStrategy::PosRandNegLow; }
bool is_random_negative(hes::BatchStrategy s) {
  return s != hes::BatchStrategy::PosHighNegLow && s != hes::BatchStrategy::PosRandNegLow && s != hes::BatchStrategy::FullBatch;
}

Outcome rl() {
  Outcome o;
  hes::Rng rng(777);
  std::vector<hes::RolloutGroup> groups;
  for (std::size_t q = 0; q < 1000; ++q) {
    hes::RolloutGroup g;
    g.query_id = hes::synth_query_id(q);
    const double rate = q % 20 == 0 ? 1.0 : q % 20 == 1 ? 0.0 : q % 20 == 2 ? 0.1 : rng.uniform();
    const bool graded = q % 7 == 0;
    for (std::size_t c = 0; c < 32; ++c) {
      hes::SampleScore s;
      s.query_id = g.query_id;
      s.sample_id = hes::synth_sample_id(q, c);
      s.hes_rel = std::round(rng.uniform(0, 30) * 2) / 2;
      s.n_tokens = 100 + rng.below(2000);
      s.labels.correct = rng.bernoulli(rate);
      s.labels.difficulty = rng.uniform();
      if (graded) s.labels.reward = *s.labels.correct ? rng.uniform(0.5, 1) : rng.uniform(0, 0.5);
      g.trajectories.push_back(s);
    }
    groups.push_back(std::move(g));
  }

  std::size_t checked = 0, nondegenerate = 0, degenerate = 0;
  for (const auto strategy : hes::all_batch_strategies()) {
    hes::BatchSpec spec;
    spec.strategy = strategy;
    spec.seed = 31337;
    hes::BatchSpec reseeded = spec;
    reseeded.seed = 31338;
    for (const auto& g : groups) {
      const hes::Batch b = hes::construct_batch(g, spec);
      const hes::Batch again = hes::construct_batch(g, spec);
      o.require(b.positives == again.positives && b.negatives == again.negatives && b.advantages == again.advantages,
                "not reproducible for " + g.query_id);
      std::vector<const hes::SampleScore*> pos, neg;
      std::map<std::string, const hes::SampleScore*> by_id;
      for (const auto& s : g.trajectories) {
        (*s.labels.correct ? pos : neg).push_back(&s);
        by_id[s.sample_id] = &s;
      }
      const std::size_t half = b.target_size / 2;
      const bool no_backfill = pos.size() >= half && neg.size() >= half;
      std::set<std::string> all(b.positives.begin(), b.positives.end());
      all.insert(b.negatives.begin(), b.negatives.end());
      o.require(all.size() == b.positives.size() + b.negatives.size(), "batch not disjoint in " + g.query_id);
      if (strategy == hes::BatchStrategy::FullBatch) {
        o.require(all.size() == g.trajectories.size(), "full batch incomplete");
      } else if (no_backfill) {
        ++checked;
        o.require(b.positives.size() == half && b.negatives.size() == half, "quota law violated in " + g.query_id);
        for (const auto& id : b.positives) o.require(*by_id[id]->labels.correct, "negative in positive slot");
        for (const auto& id : b.negatives) o.require(!*by_id[id]->labels.correct, "positive in negative slot");
        const auto chosen = as_set(b.positives);
        const auto nchosen = as_set(b.negatives);
        for (const auto* s : pos) {
          if (chosen.count(s->sample_id)) continue;
          for (const auto& id : b.positives) {
            if (strategy == hes::BatchStrategy::PosHighNegRand || strategy == hes::BatchStrategy::PosHighNegLow)
              o.require(by_id[id]->hes_rel >= s->hes_rel, "pos_high dominance violated in " + g.query_id);
            if (strategy == hes::BatchStrategy::PosLowNegRand)
              o.require(by_id[id]->hes_rel <= s->hes_rel, "pos_low dominance violated in " + g.query_id);
            if (strategy == hes::BatchStrategy::PosLengthNegRand)
              o.require(by_id[id]->n_tokens >= s->n_tokens, "pos_length dominance violated in " + g.query_id);
          }
        }
        if (strategy == hes::BatchStrategy::PosHighNegLow || strategy == hes::BatchStrategy::PosRandNegLow) {
          for (const auto* s : neg)
            if (!nchosen.count(s->sample_id))
              for (const auto& id : b.negatives)
                o.require(by_id[id]->hes_rel <= s->hes_rel, "neg_low dominance violated in " + g.query_id);
        }
        const hes::Batch other = hes::construct_batch(g, reseeded);
        if (!is_random_positive(strategy)) o.require(other.positives == b.positives, "seed changed deterministic positives");
        if (!is_random_negative(strategy)) o.require(other.negatives == b.negatives, "seed changed deterministic negatives");
      } else {
        const std::size_t expect = std::min(b.target_size, g.trajectories.size());
        o.require(all.size() == expect, "backfill did not preserve batch size in " + g.query_id);
      }
    }
  }
  for (const auto& g : groups) {
    std::vector<double> r;
    for (const auto& s : g.trajectories) r.push_back(hes::trajectory_reward(s));
    const auto a = hes::group_advantage(r);
    const bool flat = std::all_of(r.begin(), r.end(), [&](double x) { return x == r.front(); });
    if (flat) {
      ++degenerate;
      o.require(std::all_of(a.begin(), a.end(), [](double x) { return x == 0.0; }), "degenerate group not zero");
      continue;
    }
    ++nondegenerate;
    double mean = 0, sq = 0;
    for (const double x : a) mean += x;
    mean /= static_cast<double>(a.size());
    for (const double x : a) sq += (x - mean) * (x - mean);
    const double sd = std::sqrt(sq / static_cast<double>(a.size()));
    o.require(std::fabs(mean) <= 1e-9 && std::fabs(sd - 1.0) <= 1e-9, "advantage not normalized in " + g.query_id);
  }
  if (o.pass)
    o.detail = "1000 groups x G=32 x 8 strategies (" + std::to_string(checked) + " quota checks), advantages on " +
               std::to_string(nondegenerate) + " groups, zeros on " + std::to_string(degenerate) + " degenerate";
  return o;
}

// ------------------------------------------------------------ separation ordering

hes::GeneratorProfile separation_profile() {
  hes::GeneratorProfile p;
  p.seed = 2025;
  p.n_queries = 500;
  p.candidates_per_query = 8;
  p.min_tokens = 100;
  p.max_tokens = 800;
  p.base.kind = hes::BaseKind::Uniform;
  p.base.low = 0.0;
  p.base.high = 1.0;
  p.base.level_min = 0.5;
  p.base.level_max = 1.5;
  p.spikes.mean_count = 3;
  p.spikes.poisson = true;
  p.spikes.incorrect_multiplier = 2;
  p.spikes.magnitude_min = 2;
  p.spikes.magnitude_max = 5;
  p.spikes.tokens_min = 600;
  p.spikes.tokens_max = 1400;
  p.p_correct = 0.5;
  return p;
}

Outcome separation_ordering() {
  Outcome o;
  std::vector<hes::SampleScore> scores;
  hes::CorpusGenerator gen(separation_profile());
  while (auto g = gen.next()) scores.push_back(hes::score_sample(g->record));
  const double hes_rel = hes::separation_report(scores, hes::Metric::HesRel).auc;
  const double es = hes::separation_report(scores, hes::Metric::Es).auc;
  const double avg_he = hes::separation_report(scores, hes::Metric::AvgHe).auc;
  const double avg_e = hes::separation_report(scores, hes::Metric::AvgE).auc;
  const std::string values = "AUC hes_rel=" + fmt("%.3f", hes_rel) + " es=" + fmt("%.3f", es) + " avg_he=" +
                             fmt("%.3f", avg_he) + " avg_e=" + fmt("%.3f", avg_e);
  o.require(hes_rel > es, "hes_rel does not beat es: " + values);
  o.require(es > std::max(avg_he, avg_e), "es does not beat the averages: " + values);
  o.require(std::fabs(avg_he - avg_e) <= 0.1, "avg_he and avg_e differ by more than 0.1: " + values);
  if (o.pass) o.detail = std::to_string(scores.size()) + " samples, 2x spikes on incorrect: " + values;
  return o;
}

// ------------------------------------------------------------ distribution

Outcome distribution() {
  Outcome o;
  const fs::path corpus = kDir / "exp1.jsonl";
  const fs::path out = kDir / "exp1_dist.json";
  const std::string gen = "synth -o " + corpus.string() +
                          " --seed 5 --queries 100 --candidates 10 --min-tokens 100 --max-tokens 100"
                          " --base exponential --base-rate 1 --spikes 0 > /dev/null";
  o.require(run_cli(gen) == 0, "synth failed");
  o.require(run_cli("analyze dist -i " + corpus.string() + " --percentile 99.5 --format json -o " + out.string()) == 0,
            "analyze dist failed");
  if (!o.pass) return o;
  std::ifstream in(out);
  const auto doc = nlohmann::json::parse(in);
  const auto& report = doc.at("report");
  const std::size_t tokens = report.at("token_count").get<std::size_t>();
  const double value = report.at("percentiles").at(0).at("value").get<double>();
  const double target = std::log(200.0);
  o.require(tokens == 100000, "token count " + std::to_string(tokens));
  o.require(std::fabs(value - target) <= 0.1,
            "99.5th percentile " + fmt("%.4f", value) + " not within 0.1 of " + fmt("%.4f", target));
  if (o.pass) o.detail = "100000 Exp(1) tokens: p99.5=" + fmt("%.4f", value) + " vs ln 200=" + fmt("%.4f", target) + " (+-0.1)";
  return o;
}

// ------------------------------------------------------------ throughput

Outcome throughput(std::size_t bytes) {
  Outcome o;
  const fs::path corpus = kDir / "throughput.jsonl";
  const fs::path scores = kDir / "throughput_scores.jsonl";
  hes::GeneratorProfile p;
  p.seed = 1;
  p.n_queries = 1000000;
  p.candidates_per_query = 4;
  p.min_tokens = 500;
  p.max_tokens = 1500;
  p.base.kind = hes::BaseKind::Exponential;
  p.base.cap = 1.8;
  p.spikes.mean_count = 3;
  p.spikes.poisson = true;
  p.spikes.magnitude_min = 2;
  p.spikes.magnitude_max = 6;
  p.top_logprobs = 5;
  const auto stats = hes::write_generated(p, corpus, std::nullopt, bytes);

  const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<unsigned>(cores, 4);
  const auto start = Clock::now();
  const int rc = run_cli("score -i " + corpus.string() + " -o " + scores.string() + " --workers " +
                         std::to_string(workers) + " --summary " + (kDir / "throughput_summary.json").string());
  const double secs = seconds_since(start);
  rusage usage{};
  getrusage(RUSAGE_CHILDREN, &usage);
  const double peak_mb = static_cast<double>(usage.ru_maxrss) / 1024.0;
  fs::remove(corpus);
  fs::remove(scores);

  o.require(rc == 0, "score exited " + std::to_string(rc));
  const std::string measured = fmt("%.0f", static_cast<double>(stats.bytes) / 1e6) + " MB, " +
                               std::to_string(stats.tokens) + " tokens (top-5 logprobs), " + std::to_string(workers) +
                               " worker(s) on " + std::to_string(cores) + " core(s): " + fmt("%.1f", secs) +
                               "s, peak RSS " + fmt("%.0f", peak_mb) + " MB";
  o.require(secs < 60.0, measured + "; needs <60s");
  o.require(peak_mb < 1024.0, measured + "; needs <1024 MB");
  if (o.pass) o.detail = measured;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  bool skip_throughput = false;
  std::size_t throughput_bytes = std::size_t{1} << 30;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--skip-throughput") skip_throughput = true;
    else if (a == "--throughput-bytes" && i + 1 < argc) throughput_bytes = std::stoull(argv[++i]);
  }
  fs::create_directories(kDir);

  report("metric-oracle", metric_oracle);
  report("identities", identities);
  report("token-rule", token_rule);
  report("selection", selection);
  report("rft", rft);
  report("rl", rl);
  report("separation-order", separation_ordering);
  report("distribution", distribution);
  if (skip_throughput) std::printf("SKIP  throughput\n");
  else report("throughput", [&] { return throughput(throughput_bytes); });

  std::printf("%d failure(s)\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
