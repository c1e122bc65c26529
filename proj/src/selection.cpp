#include "hes/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "hes/count_rule.hpp"
#include "hes/error.hpp"
#include "hes/rng.hpp"

namespace hes {

namespace {

std::string normalize(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

/// Indices of `scores` sorted by sample_id.
std::vector<std::size_t> id_order(std::span<const SampleScore> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a].sample_id < scores[b].sample_id; });
  return idx;
}

/// Ranks all of `idx` by key (descending when `descending`), ties by sample_id.
template <class Key>
void rank_by(std::vector<std::size_t>& idx, std::span<const SampleScore> scores, Key key,
             bool descending) {
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double ka = key(scores[a]);
    const double kb = key(scores[b]);
    if (ka != kb) return descending ? ka > kb : ka < kb;
    return scores[a].sample_id < scores[b].sample_id;
  });
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void require_correct_labels(std::span<const SampleScore> scores) {
  for (const SampleScore& s : scores) {
    if (!s.labels.correct) {
      throw Error(ErrorCode::MissingCorrectLabel, "sample has no correct label")
          .with_record(s.sample_id);
    }
  }
}

void check_unique_ids(std::span<const SampleScore> scores) {
  std::vector<std::size_t> idx = id_order(scores);
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (scores[idx[i]].sample_id == scores[idx[i - 1]].sample_id) {
      throw Error(ErrorCode::DuplicateSampleId, "duplicate sample_id in score table")
          .with_record(scores[idx[i]].sample_id);
    }
  }
}

/// Correct samples grouped by query, each group ranked by hes_rel descending.
std::map<std::string, std::vector<std::size_t>> ranked_correct_by_query(
    std::span<const SampleScore> scores) {
  require_correct_labels(scores);
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto& group = groups[scores[i].query_id];
    if (*scores[i].labels.correct) group.push_back(i);
  }
  for (auto& [_, group] : groups) {
    rank_by(group, scores, [](const SampleScore& s) { return s.hes_rel; }, true);
  }
  return groups;
}

}  // namespace

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::HesRel: return "hes_rel";
    case Metric::HesAbs: return "hes_abs";
    case Metric::Es: return "es";
    case Metric::AvgE: return "avg_e";
    case Metric::AvgHe: return "avg_he";
  }
  return "hes_rel";
}

Metric parse_metric(std::string_view text) {
  const std::string s = normalize(text);
  if (s == "hes_rel" || s == "hes") return Metric::HesRel;
  if (s == "hes_abs") return Metric::HesAbs;
  if (s == "es") return Metric::Es;
  if (s == "avg_e") return Metric::AvgE;
  if (s == "avg_he") return Metric::AvgHe;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(text) + "'");
}

double metric_value(const SampleScore& score, Metric metric) {
  switch (metric) {
    case Metric::HesRel: return score.hes_rel;
    case Metric::HesAbs: return score.hes_abs;
    case Metric::Es: return score.es;
    case Metric::AvgE: return score.avg_e;
    case Metric::AvgHe: return score.avg_he;
  }
  return score.hes_rel;
}

std::string_view to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::HighestHes: return "highest_hes";
    case SelectionMode::LowestHes: return "lowest_hes";
    case SelectionMode::Random: return "random";
    case SelectionMode::Length: return "length";
    case SelectionMode::Difficulty: return "difficulty";
  }
  return "highest_hes";
}

SelectionMode parse_selection_mode(std::string_view text) {
  const std::string s = normalize(text);
  if (s == "highest_hes" || s == "highest") return SelectionMode::HighestHes;
  if (s == "lowest_hes" || s == "lowest") return SelectionMode::LowestHes;
  if (s == "random") return SelectionMode::Random;
  if (s == "length") return SelectionMode::Length;
  if (s == "difficulty") return SelectionMode::Difficulty;
  throw Error(ErrorCode::InvalidArgument, "unknown selection mode '" + std::string(text) + "'");
}

void SelectionSpec::validate() const {
  if (ratio) {
    if (!(*ratio > 0.0 && *ratio <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "selection ratio must be in (0, 1]");
    }
  } else if (!budget) {
    throw Error(ErrorCode::InvalidArgument, "selection needs a ratio or a budget");
  }
  if (mode == SelectionMode::Random && !seed) {
    throw Error(ErrorCode::InvalidArgument, "random selection requires a seed");
  }
  if (strata && *strata == 0) throw Error(ErrorCode::InvalidArgument, "strata must be >= 1");
}

std::size_t SelectionSpec::target_count(std::size_t population) const {
  if (ratio) return count_for_fraction(*ratio, population);
  return std::min(population, *budget);
}

SelectionManifest sft_select(std::span<const SampleScore> scores, const SelectionSpec& spec,
                             std::string corpus_digest) {
  spec.validate();
  if (scores.empty()) throw Error(ErrorCode::EmptyCorpus, "no scored samples to select from");
  check_unique_ids(scores);

  const std::size_t total = scores.size();
  const std::size_t m = spec.target_count(total);
  std::vector<std::size_t> order = id_order(scores);

  SelectionManifest manifest;
  manifest.strategy = "sft:" + std::string(to_string(spec.mode));
  manifest.corpus_digest = std::move(corpus_digest);
  manifest.params["mode"] = to_string(spec.mode);
  if (spec.ratio) {
    manifest.params["ratio"] = *spec.ratio;
  } else {
    manifest.params["budget"] = *spec.budget;
  }
  manifest.params["population"] = total;
  manifest.params["count"] = m;

  switch (spec.mode) {
    case SelectionMode::HighestHes:
    case SelectionMode::LowestHes: {
      const bool highest = spec.mode == SelectionMode::HighestHes;
      manifest.params["metric"] = to_string(spec.metric);
      // One total order (metric desc, sample_id asc); lowest takes its tail, so
      // highest(m) and lowest(M - m) partition the corpus even under ties.
      rank_by(order, scores, [&](const SampleScore& s) { return metric_value(s, spec.metric); },
              true);
      if (!highest) std::reverse(order.begin(), order.end());
      if (m > 0) manifest.threshold = metric_value(scores[order[m - 1]], spec.metric);
      break;
    }
    case SelectionMode::Length:
      rank_by(order, scores, [](const SampleScore& s) { return static_cast<double>(s.n_tokens); },
              true);
      break;
    case SelectionMode::Difficulty: {
      std::vector<double> difficulties;
      difficulties.reserve(total);
      for (const SampleScore& s : scores) {
        if (!s.labels.difficulty) {
          throw Error(ErrorCode::MissingField, "difficulty mode needs a difficulty label")
              .with_record(s.sample_id);
        }
        difficulties.push_back(*s.labels.difficulty);
      }
      const double mid = median(std::move(difficulties));
      manifest.details["median_difficulty"] = mid;
      rank_by(order, scores,
              [&](const SampleScore& s) { return std::abs(*s.labels.difficulty - mid); }, false);
      break;
    }
    case SelectionMode::Random: {
      manifest.seed = spec.seed;
      manifest.params["seed"] = *spec.seed;
      const std::vector<std::size_t> perm = seeded_permutation(total, *spec.seed);
      std::vector<std::size_t> drawn(total);
      for (std::size_t i = 0; i < total; ++i) drawn[i] = order[perm[i]];
      order = std::move(drawn);
      break;
    }
  }

  manifest.selected.reserve(m);
  for (std::size_t i = 0; i < m; ++i) manifest.selected.push_back(scores[order[i]].sample_id);
  manifest.rejected_count = total - m;
  return manifest;
}

std::string_view to_string(RftScope scope) {
  return scope == RftScope::PerQuery ? "per_query" : "global";
}

RftScope parse_rft_scope(std::string_view text) {
  const std::string s = normalize(text);
  if (s == "per_query") return RftScope::PerQuery;
  if (s == "global") return RftScope::Global;
  throw Error(ErrorCode::InvalidArgument, "unknown RFT scope '" + std::string(text) + "'");
}

void RftSpec::validate() const {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  if (candidates && k > *candidates) {
    throw Error(ErrorCode::InvalidArgument, "k must not exceed the candidate count K");
  }
}

SelectionManifest rft_per_query_select(std::span<const SampleScore> scores, std::size_t k,
                                       std::string corpus_digest) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  check_unique_ids(scores);
  const auto groups = ranked_correct_by_query(scores);

  SelectionManifest manifest;
  manifest.strategy = "rft:per_query";
  manifest.corpus_digest = std::move(corpus_digest);
  manifest.params["k"] = k;
  nlohmann::json per_query = nlohmann::json::object();
  std::size_t budget = 0;
  for (const auto& [query, ranked] : groups) {
    const std::size_t take = std::min(k, ranked.size());
    for (std::size_t i = 0; i < take; ++i) manifest.selected.push_back(scores[ranked[i]].sample_id);
    per_query[query] = take;
    budget += take;
  }
  manifest.details["per_query"] = std::move(per_query);
  manifest.details["budget"] = budget;
  manifest.rejected_count = scores.size() - manifest.selected.size();
  return manifest;
}

std::size_t rft_equivalent_budget(std::span<const SampleScore> scores, std::size_t k) {
  std::size_t budget = 0;
  for (const auto& [_, ranked] : ranked_correct_by_query(scores)) budget += std::min(k, ranked.size());
  return budget;
}

SelectionManifest rft_global_select(std::span<const SampleScore> scores,
                                    std::optional<std::size_t> budget, std::size_t k,
                                    std::string corpus_digest) {
  check_unique_ids(scores);
  require_correct_labels(scores);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (*scores[i].labels.correct) pool.push_back(i);
  }
  rank_by(pool, scores, [](const SampleScore& s) { return s.hes_rel; }, true);

  SelectionManifest manifest;
  manifest.strategy = "rft:global";
  manifest.corpus_digest = std::move(corpus_digest);
  std::size_t n = 0;
  if (budget) {
    n = *budget;
    manifest.params["budget"] = n;
  } else {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
    n = rft_equivalent_budget(scores, k);
    manifest.params["k"] = k;
    manifest.details["budget_source"] = "per_query_equivalent";
  }
  const std::size_t take = std::min(n, pool.size());
  for (std::size_t i = 0; i < take; ++i) manifest.selected.push_back(scores[pool[i]].sample_id);
  if (take > 0) manifest.threshold = scores[pool[take - 1]].hes_rel;
  manifest.details["budget"] = n;
  manifest.details["pool_size"] = pool.size();
  manifest.rejected_count = scores.size() - take;
  return manifest;
}

SelectionManifest rft_select(std::span<const SampleScore> scores, const RftSpec& spec,
                             std::string corpus_digest) {
  spec.validate();
  SelectionManifest manifest =
      spec.scope == RftScope::PerQuery
          ? rft_per_query_select(scores, spec.k, std::move(corpus_digest))
          : rft_global_select(scores, spec.budget, spec.k, std::move(corpus_digest));
  if (spec.candidates) manifest.params["candidates"] = *spec.candidates;
  return manifest;
}

std::vector<std::vector<SampleScore>> length_strata(std::span<const SampleScore> scores,
                                                    std::size_t groups) {
  if (groups == 0) throw Error(ErrorCode::InvalidArgument, "groups must be >= 1");
  if (scores.empty()) throw Error(ErrorCode::EmptyCorpus, "no scored samples to stratify");
  if (groups > scores.size()) {
    throw Error(ErrorCode::InvalidArgument, "more strata than samples");
  }
  std::vector<std::size_t> order = id_order(scores);
  rank_by(order, scores, [](const SampleScore& s) { return static_cast<double>(s.n_tokens); },
          false);
  const std::size_t total = order.size();
  std::vector<std::vector<SampleScore>> strata(groups);
  // Stratum g spans [ceil(g n / G), ceil((g + 1) n / G)); remainders go to the shorter strata.
  const auto start = [&](std::size_t g) { return (total * g + groups - 1) / groups; };
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t i = start(g); i < start(g + 1); ++i) {
      strata[g].push_back(scores[order[i]]);
    }
  }
  return strata;
}

namespace {

std::string stratum_label(std::size_t index, std::size_t groups) {
  if (groups == 3) {
    static constexpr const char* kNames[] = {"short", "medium", "long"};
    return kNames[index];
  }
  return "stratum_" + std::to_string(index);
}

SelectionManifest select_in_stratum(const std::vector<SampleScore>& stratum, std::size_t index,
                                    std::size_t groups, const SelectionSpec& spec,
                                    const std::string& corpus_digest) {
  SelectionManifest m = sft_select(stratum, spec, corpus_digest);
  m.params["strata"] = groups;
  m.details["stratum"] = stratum_label(index, groups);
  m.details["stratum_index"] = index;
  m.details["min_tokens"] = stratum.front().n_tokens;
  m.details["max_tokens"] = stratum.back().n_tokens;
  return m;
}

}  // namespace

std::vector<SelectionManifest> stratified_select(std::span<const SampleScore> scores,
                                                 std::size_t groups, const SelectionSpec& spec,
                                                 std::string corpus_digest) {
  spec.validate();
  if (groups == 1) return {sft_select(scores, spec, std::move(corpus_digest))};
  const auto strata = length_strata(scores, groups);
  std::vector<SelectionManifest> manifests;
  for (std::size_t g = 0; g < strata.size(); ++g) {
    if (strata[g].empty()) continue;
    manifests.push_back(select_in_stratum(strata[g], g, groups, spec, corpus_digest));
  }
  return manifests;
}

SelectionManifest rederive(const SelectionManifest& manifest, std::span<const SampleScore> scores) {
  const std::string& strategy = manifest.strategy;
  const nlohmann::json& p = manifest.params;
  try {
    if (strategy.rfind("sft:", 0) == 0) {
      SelectionSpec spec;
      spec.mode = parse_selection_mode(p.at("mode").get<std::string>());
      if (p.contains("ratio")) {
        spec.ratio = p.at("ratio").get<double>();
      } else {
        spec.ratio.reset();
        spec.budget = p.at("budget").get<std::size_t>();
      }
      if (p.contains("metric")) spec.metric = parse_metric(p.at("metric").get<std::string>());
      if (p.contains("seed")) spec.seed = p.at("seed").get<std::uint64_t>();
      if (p.contains("strata")) {
        const std::size_t groups = p.at("strata").get<std::size_t>();
        const std::size_t index = manifest.details.at("stratum_index").get<std::size_t>();
        const auto strata = length_strata(scores, groups);
        return select_in_stratum(strata.at(index), index, groups, spec, manifest.corpus_digest);
      }
      return sft_select(scores, spec, manifest.corpus_digest);
    }
    if (strategy == "rft:per_query" || strategy == "rft:global") {
      RftSpec spec;
      spec.scope = strategy == "rft:per_query" ? RftScope::PerQuery : RftScope::Global;
      if (p.contains("k")) spec.k = p.at("k").get<std::size_t>();
      if (p.contains("budget")) spec.budget = p.at("budget").get<std::size_t>();
      if (p.contains("candidates")) spec.candidates = p.at("candidates").get<std::size_t>();
      return rft_select(scores, spec, manifest.corpus_digest);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("manifest params: ") + e.what());
  }
  throw Error(ErrorCode::InvalidArgument, "cannot re-derive strategy '" + strategy + "'");
}

}  // namespace hes
