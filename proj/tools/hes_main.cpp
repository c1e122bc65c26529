// hes: score reasoning corpora by high-entropy sum and build selections,
// RL batches and analysis reports from the scores.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hes/analysis.hpp"
#include "hes/corpus_io.hpp"
#include "hes/error.hpp"
#include "hes/manifest.hpp"
#include "hes/rl_sampler.hpp"
#include "hes/selection.hpp"
#include "hes/synth.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

/// Thrown for flag combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ordered_json = nlohmann::ordered_json;

void emit(const ordered_json& doc, const std::string& output, const std::string& format) {
  std::string text;
  if (format == "text") {
    for (const auto& [key, value] : doc.items()) {
      text += key + ": " + (value.is_string() ? value.get<std::string>() : value.dump()) + "\n";
    }
  } else {
    text = doc.dump(2) + "\n";
  }
  if (output.empty() || output == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(output, std::ios::binary | std::ios::trunc);
  if (!out) throw hes::Error(hes::ErrorCode::IoFailure, "cannot open " + output + " for writing");
  out << text;
  if (!out) throw hes::Error(hes::ErrorCode::IoFailure, "write failure on " + output);
}

ordered_json config_json(const hes::MetricConfig& c) {
  return {{"p", c.p}, {"tau", c.tau}, {"tail_mode", hes::to_string(c.tail_mode)}};
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  std::string input;
  std::string output;
  std::string summary;
  std::string format = "json";
  hes::MetricConfig config;
  std::string tail_mode = "lump";
  std::size_t workers = 1;
  bool indices = false;
  bool skip_invalid = false;
};

void add_score(CLI::App& app, ScoreArgs& a) {
  auto* cmd = app.add_subcommand("score", "Score a corpus; writes one score line per sample");
  cmd->add_option("-i,--input", a.input, "Corpus (JSON lines)")->required();
  cmd->add_option("-o,--output", a.output, "Score file to write")->required();
  cmd->add_option("--p", a.config.p, "High-entropy token fraction")->capture_default_str();
  cmd->add_option("--tau", a.config.tau, "Absolute entropy threshold (nats)")->capture_default_str();
  cmd->add_option("--tail-mode", a.tail_mode, "Top-k tail handling")
      ->check(CLI::IsMember({"lump", "ignore"}))
      ->capture_default_str();
  cmd->add_option("--workers", a.workers, "Scoring threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_flag("--indices", a.indices, "Include high_indices in each score line");
  cmd->add_flag("--skip-invalid", a.skip_invalid, "Report invalid records and continue");
  cmd->add_option("--summary", a.summary, "Write the run summary here instead of stdout");
  cmd->add_option("--format", a.format)->check(CLI::IsMember({"json", "text"}))->capture_default_str();
}

int run_score(ScoreArgs& a) {
  a.config.tail_mode = hes::parse_tail_mode(a.tail_mode);
  a.config.validate();
  hes::ScoreRunOptions opts;
  opts.workers = a.workers;
  opts.include_indices = a.indices;
  opts.skip_invalid = a.skip_invalid;
  const hes::ScoreRunStats stats = hes::score_corpus(a.input, a.output, a.config, opts);

  ordered_json doc;
  doc["command"] = "score";
  doc["input"] = a.input;
  doc["input_digest"] = hes::file_digest(a.input);
  doc["output"] = a.output;
  doc["output_digest"] = hes::file_digest(a.output);
  doc["config"] = config_json(a.config);
  doc["workers"] = a.workers;
  doc["records_in"] = stats.records_in;
  doc["records_out"] = stats.records_out;
  doc["tokens"] = stats.tokens;
  doc["clamped_entropies"] = stats.clamped_entropies;
  ordered_json errors = ordered_json::array();
  for (const hes::Error& e : stats.ledger) errors.push_back(e.what());
  doc["errors"] = std::move(errors);
  emit(doc, a.summary, a.format);
  return 0;
}

// ---------------------------------------------------------------- select

struct SelectArgs {
  std::string input;
  std::string output;
  std::string mode = "highest_hes";
  std::string metric = "hes_rel";
  std::optional<double> ratio;
  std::optional<std::size_t> budget;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> strata;
  // rft
  std::string scope = "per_query";
  std::size_t k = 2;
  std::optional<std::size_t> candidates;
};

void add_select(CLI::App& app, SelectArgs& a, CLI::App*& sft, CLI::App*& rft) {
  auto* cmd = app.add_subcommand("select", "Select samples from a score file");
  cmd->require_subcommand(1);

  sft = cmd->add_subcommand("sft", "Percentile selection and baselines");
  sft->add_option("-i,--input", a.input, "Score file")->required();
  sft->add_option("-o,--output", a.output, "Manifest to write")->required();
  sft->add_option("--mode", a.mode, "highest | lowest | random | length | difficulty")->capture_default_str();
  sft->add_option("--metric", a.metric, "hes_rel | hes_abs | es | avg_e | avg_he")->capture_default_str();
  auto* ratio = sft->add_option("--ratio", a.ratio, "Fraction of samples to keep, in (0, 1]");
  auto* budget = sft->add_option("--budget", a.budget, "Absolute number of samples to keep");
  ratio->excludes(budget);
  sft->add_option("--seed", a.seed, "Seed (required for random mode)");
  sft->add_option("--strata", a.strata, "Split by length into this many groups first")
      ->check(CLI::PositiveNumber);

  rft = cmd->add_subcommand("rft", "Rejection fine-tuning selection over correct samples");
  rft->add_option("-i,--input", a.input, "Score file")->required();
  rft->add_option("-o,--output", a.output, "Manifest to write")->required();
  rft->add_option("--scope", a.scope, "per_query | global")->capture_default_str();
  rft->add_option("--k", a.k, "Responses kept per query")->check(CLI::PositiveNumber)->capture_default_str();
  rft->add_option("--budget", a.budget, "Global pool budget (default: per-query equivalent)");
  rft->add_option("--candidates", a.candidates, "Candidates generated per query (K)");
}

void write_manifests(const std::vector<hes::SelectionManifest>& manifests, const std::string& path) {
  if (manifests.size() == 1) {
    hes::write_manifest(manifests.front(), path);
    return;
  }
  ordered_json arr = ordered_json::array();
  for (const auto& m : manifests) arr.push_back(hes::manifest_to_json(m));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw hes::Error(hes::ErrorCode::IoFailure, "cannot open " + path + " for writing");
  out << arr.dump(2) << '\n';
}

int run_select_sft(const SelectArgs& a) {
  hes::SelectionSpec spec;
  spec.mode = hes::parse_selection_mode(a.mode);
  spec.metric = hes::parse_metric(a.metric);
  if (a.ratio) {
    spec.ratio = a.ratio;
  } else if (a.budget) {
    spec.ratio.reset();
    spec.budget = a.budget;
  }
  spec.seed = a.seed;
  spec.strata = a.strata;
  spec.validate();

  const std::string digest = hes::file_digest(a.input);
  const std::vector<hes::SampleScore> scores = hes::read_scores(std::filesystem::path(a.input));
  std::vector<hes::SelectionManifest> manifests;
  if (a.strata && *a.strata > 1) {
    manifests = hes::stratified_select(scores, *a.strata, spec, digest);
  } else {
    manifests.push_back(hes::sft_select(scores, spec, digest));
  }
  write_manifests(manifests, a.output);
  return 0;
}

int run_select_rft(const SelectArgs& a) {
  hes::RftSpec spec;
  spec.scope = hes::parse_rft_scope(a.scope);
  spec.k = a.k;
  spec.candidates = a.candidates;
  spec.budget = a.budget;
  if (spec.scope == hes::RftScope::PerQuery && a.budget) {
    throw UsageError("--budget applies to --scope global only");
  }
  spec.validate();
  const std::string digest = hes::file_digest(a.input);
  const std::vector<hes::SampleScore> scores = hes::read_scores(std::filesystem::path(a.input));
  hes::write_manifest(hes::rft_select(scores, spec, digest), a.output);
  return 0;
}

// ---------------------------------------------------------------- rl-batch

struct BatchArgs {
  std::string input;
  std::string output;
  std::string summary;
  std::string strategy = "pos_high_neg_rand";
  double fraction = hes::kDefaultBatchFraction;
  std::optional<std::uint64_t> seed;
  std::string format = "json";
};

void add_batch(CLI::App& app, BatchArgs& a) {
  auto* cmd = app.add_subcommand("rl-batch", "Build RL batches from rollout groups in a score file");
  cmd->add_option("-i,--input", a.input, "Score file (rollouts grouped by query_id)")->required();
  cmd->add_option("-o,--output", a.output, "Batch file to write (JSON lines)")->required();
  cmd->add_option("--strategy", a.strategy, "e.g. pos-high-neg-rand, full-batch")->capture_default_str();
  cmd->add_option("--fraction", a.fraction, "Batch fraction of the group size")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Seed (required for strategies with a random side)");
  cmd->add_option("--summary", a.summary, "Write the summary here instead of stdout");
  cmd->add_option("--format", a.format)->check(CLI::IsMember({"json", "text"}))->capture_default_str();
}

int run_batch(const BatchArgs& a) {
  hes::BatchSpec spec;
  spec.strategy = hes::parse_batch_strategy(a.strategy);
  spec.fraction = a.fraction;
  const bool needs_seed = spec.strategy != hes::BatchStrategy::FullBatch &&
                          spec.strategy != hes::BatchStrategy::PosHighNegLow;
  if (needs_seed && !a.seed) throw UsageError("--seed is required for strategy " + a.strategy);
  spec.seed = a.seed.value_or(0);
  spec.validate();

  const std::string digest = hes::file_digest(a.input);
  const std::vector<hes::SampleScore> scores = hes::read_scores(std::filesystem::path(a.input));
  const std::vector<hes::RolloutGroup> groups = hes::group_rollouts(scores);
  std::ofstream out(a.output, std::ios::binary | std::ios::trunc);
  if (!out) throw hes::Error(hes::ErrorCode::IoFailure, "cannot open " + a.output + " for writing");
  const hes::BatchSummary summary = hes::batch_report(groups, spec, &out);
  out.close();

  ordered_json doc;
  doc["command"] = "rl-batch";
  doc["strategy"] = hes::to_string(spec.strategy);
  doc["fraction"] = spec.fraction;
  doc["seed"] = a.seed ? ordered_json(*a.seed) : ordered_json(nullptr);
  doc["input_digest"] = digest;
  doc["output_digest"] = hes::file_digest(a.output);
  doc["summary"] = hes::summary_to_json(summary);
  emit(doc, a.summary, a.format);
  return 0;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string input;
  std::string output;
  std::string format = "json";
  std::vector<std::string> metrics;
  std::vector<double> percentiles;
  std::size_t bins = 50;
  std::optional<double> hist_max;
  std::string tail_mode = "lump";
  double p = hes::kDefaultHighEntropyFraction;
  std::size_t top = 0;
  std::string csv;
  std::string a_scores;
  std::string b_scores;
  double ratio = hes::kEfficiencyRatio;
  std::string metric = "hes_rel";
};

void add_analyze(CLI::App& app, AnalyzeArgs& a, CLI::App*& discrim, CLI::App*& dist, CLI::App*& tokens,
                 CLI::App*& agreement) {
  auto* cmd = app.add_subcommand("analyze", "Statistical reports");
  cmd->require_subcommand(1);
  auto common = [&](CLI::App* sub) {
    sub->add_option("-o,--output", a.output, "Report file (default stdout)");
    sub->add_option("--format", a.format)->check(CLI::IsMember({"json", "text"}))->capture_default_str();
  };

  discrim = cmd->add_subcommand("discrim", "Correct vs incorrect separation (AUC) per metric");
  discrim->add_option("-i,--input", a.input, "Score file")->required();
  discrim->add_option("--metric", a.metrics, "Metric(s); default all five");
  common(discrim);

  dist = cmd->add_subcommand("dist", "Token entropy distribution and percentiles");
  dist->add_option("-i,--input", a.input, "Corpus file")->required();
  dist->add_option("--percentile", a.percentiles, "Percentile(s) in [0, 100]; default 99.5");
  dist->add_option("--bins", a.bins, "Histogram bins")->check(CLI::PositiveNumber)->capture_default_str();
  dist->add_option("--hist-max", a.hist_max, "Upper histogram edge (default: observed max)");
  dist->add_option("--tail-mode", a.tail_mode)->check(CLI::IsMember({"lump", "ignore"}))->capture_default_str();
  dist->add_option("--csv", a.csv, "Also write histogram bins as CSV");
  common(dist);

  tokens = cmd->add_subcommand("tokens", "Frequency of high-entropy token texts");
  tokens->add_option("-i,--input", a.input, "Corpus file")->required();
  tokens->add_option("--p", a.p, "High-entropy token fraction")->capture_default_str();
  tokens->add_option("--tail-mode", a.tail_mode)->check(CLI::IsMember({"lump", "ignore"}))->capture_default_str();
  tokens->add_option("--top", a.top, "Keep only the N most frequent (0 = all)");
  tokens->add_option("--csv", a.csv, "Also write the table as CSV");
  common(tokens);

  agreement = cmd->add_subcommand("agreement", "Rank agreement between two scorers");
  agreement->add_option("--a", a.a_scores, "First score file")->required();
  agreement->add_option("--b", a.b_scores, "Second score file")->required();
  agreement->add_option("--ratio", a.ratio, "Top fraction compared for overlap")->capture_default_str();
  agreement->add_option("--metric", a.metric)->capture_default_str();
  common(agreement);
}

int run_discrim(const AnalyzeArgs& a) {
  std::vector<hes::Metric> metrics;
  if (a.metrics.empty()) {
    metrics = {hes::Metric::HesRel, hes::Metric::HesAbs, hes::Metric::Es, hes::Metric::AvgE, hes::Metric::AvgHe};
  } else {
    for (const auto& m : a.metrics) metrics.push_back(hes::parse_metric(m));
  }
  const std::vector<hes::SampleScore> scores = hes::read_scores(std::filesystem::path(a.input));
  ordered_json doc;
  doc["command"] = "analyze discrim";
  doc["input_digest"] = hes::file_digest(a.input);
  ordered_json reports = ordered_json::array();
  for (const hes::Metric m : metrics) reports.push_back(hes::to_json(hes::separation_report(scores, m)));
  doc["reports"] = std::move(reports);
  emit(doc, a.output, a.format);
  return 0;
}

int run_dist(const AnalyzeArgs& a) {
  const hes::TailMode tail = hes::parse_tail_mode(a.tail_mode);
  std::vector<double> percentiles = a.percentiles;
  if (percentiles.empty()) percentiles.push_back(99.5);
  hes::EntropyDistribution dist;
  hes::CorpusReader reader(std::filesystem::path(a.input));
  while (auto rec = reader.next()) dist.add_record(*rec, tail);
  const hes::DistributionReport report = dist.report(percentiles, a.bins, a.hist_max);

  ordered_json doc;
  doc["command"] = "analyze dist";
  doc["input_digest"] = hes::file_digest(a.input);
  doc["tail_mode"] = a.tail_mode;
  doc["report"] = hes::to_json(report);
  emit(doc, a.output, a.format);
  if (!a.csv.empty()) {
    std::ofstream csv(a.csv, std::ios::binary | std::ios::trunc);
    csv << "bin_low,bin_high,count\n";
    for (std::size_t i = 0; i < report.histogram.size(); ++i) {
      csv << report.bin_edges[i] << ',' << report.bin_edges[i + 1] << ',' << report.histogram[i] << '\n';
    }
    if (!csv) throw hes::Error(hes::ErrorCode::IoFailure, "write failure on " + a.csv);
  }
  return 0;
}

int run_tokens(const AnalyzeArgs& a) {
  hes::HighEntropyTokenCounter counter(a.p, hes::parse_tail_mode(a.tail_mode));
  hes::CorpusReader reader(std::filesystem::path(a.input));
  while (auto rec = reader.next()) counter.add_record(*rec);
  std::vector<hes::TokenCount> table = counter.table();
  if (a.top > 0 && table.size() > a.top) table.resize(a.top);

  ordered_json doc;
  doc["command"] = "analyze tokens";
  doc["input_digest"] = hes::file_digest(a.input);
  doc["p"] = a.p;
  doc["tail_mode"] = a.tail_mode;
  doc["tokens"] = hes::to_json(table);
  emit(doc, a.output, a.format);
  if (!a.csv.empty()) {
    std::ofstream csv(a.csv, std::ios::binary | std::ios::trunc);
    csv << "token,count\n";
    for (const auto& t : table) csv << '"' << t.token << "\"," << t.count << '\n';
    if (!csv) throw hes::Error(hes::ErrorCode::IoFailure, "write failure on " + a.csv);
  }
  return 0;
}

int run_agreement(const AnalyzeArgs& a) {
  const auto sa = hes::read_scores(std::filesystem::path(a.a_scores));
  const auto sb = hes::read_scores(std::filesystem::path(a.b_scores));
  const hes::Metric metric = hes::parse_metric(a.metric);
  ordered_json doc;
  doc["command"] = "analyze agreement";
  doc["a_digest"] = hes::file_digest(a.a_scores);
  doc["b_digest"] = hes::file_digest(a.b_scores);
  doc["ratio"] = a.ratio;
  doc["metric"] = hes::to_string(metric);
  doc["report"] = hes::to_json(hes::cross_scorer_agreement(sa, sb, a.ratio, metric));
  emit(doc, a.output, a.format);
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string output;
  std::string ledger;
  std::string profile_path;
  std::optional<std::size_t> max_bytes;
  bool print_profile = false;
  hes::GeneratorProfile profile;
  std::string base_kind;
  std::optional<double> base_value, base_low, base_high, base_rate, base_cap, level_min, level_max;
};

void add_synth(CLI::App& app, SynthArgs& a, CLI::App*& cmd) {
  cmd = app.add_subcommand("synth", "Generate a seeded synthetic corpus and its ledger");
  hes::GeneratorProfile& p = a.profile;
  cmd->add_option("-o,--output", a.output, "Corpus file to write")->required();
  cmd->add_option("--ledger", a.ledger, "Ground-truth ledger file");
  cmd->add_option("--profile", a.profile_path, "Profile JSON; flags below override it");
  cmd->add_option("--seed", p.seed)->required();
  cmd->add_option("--queries", p.n_queries);
  cmd->add_option("--candidates", p.candidates_per_query);
  cmd->add_option("--min-tokens", p.min_tokens);
  cmd->add_option("--max-tokens", p.max_tokens);
  cmd->add_option("--base", a.base_kind, "constant | uniform | exponential")
      ->check(CLI::IsMember({"constant", "uniform", "exponential"}));
  cmd->add_option("--base-value", a.base_value);
  cmd->add_option("--base-low", a.base_low);
  cmd->add_option("--base-high", a.base_high);
  cmd->add_option("--base-rate", a.base_rate);
  cmd->add_option("--base-cap", a.base_cap);
  cmd->add_option("--level-min", a.level_min);
  cmd->add_option("--level-max", a.level_max);
  cmd->add_option("--spikes", p.spikes.mean_count, "Mean spikes per correct sample");
  cmd->add_flag("--poisson", p.spikes.poisson, "Poisson spike counts");
  cmd->add_option("--incorrect-multiplier", p.spikes.incorrect_multiplier);
  cmd->add_option("--spike-min", p.spikes.magnitude_min);
  cmd->add_option("--spike-max", p.spikes.magnitude_max);
  cmd->add_option("--spike-tokens-min", p.spikes.tokens_min);
  cmd->add_option("--spike-tokens-max", p.spikes.tokens_max);
  cmd->add_option("--plant", p.spikes.planted_texts, "Spike token text (repeatable)");
  cmd->add_option("--p-correct", p.p_correct);
  cmd->add_option("--top-logprobs", p.top_logprobs, "Write top-K logprobs instead of entropies");
  cmd->add_option("--ledger-p", p.ledger_p);
  cmd->add_option("--max-bytes", a.max_bytes, "Stop after this many corpus bytes");
  cmd->add_flag("--print-profile", a.print_profile, "Print the resolved profile");
}

int run_synth(SynthArgs& a, CLI::App* cmd) {
  hes::GeneratorProfile profile = a.profile;
  if (!a.profile_path.empty()) {
    std::ifstream in(a.profile_path);
    if (!in) throw hes::Error(hes::ErrorCode::IoFailure, "cannot open " + a.profile_path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw hes::Error(hes::ErrorCode::InvalidProfile, e.what());
    }
    profile = hes::profile_from_json(doc);
    // Flags given explicitly override the file.
    const hes::GeneratorProfile& f = a.profile;
    auto set = [&](const char* flag, auto& dst, const auto& src) {
      if (cmd->count(flag) > 0) dst = src;
    };
    set("--seed", profile.seed, f.seed);
    set("--queries", profile.n_queries, f.n_queries);
    set("--candidates", profile.candidates_per_query, f.candidates_per_query);
    set("--min-tokens", profile.min_tokens, f.min_tokens);
    set("--max-tokens", profile.max_tokens, f.max_tokens);
    set("--spikes", profile.spikes.mean_count, f.spikes.mean_count);
    set("--poisson", profile.spikes.poisson, f.spikes.poisson);
    set("--incorrect-multiplier", profile.spikes.incorrect_multiplier, f.spikes.incorrect_multiplier);
    set("--spike-min", profile.spikes.magnitude_min, f.spikes.magnitude_min);
    set("--spike-max", profile.spikes.magnitude_max, f.spikes.magnitude_max);
    set("--spike-tokens-min", profile.spikes.tokens_min, f.spikes.tokens_min);
    set("--spike-tokens-max", profile.spikes.tokens_max, f.spikes.tokens_max);
    set("--plant", profile.spikes.planted_texts, f.spikes.planted_texts);
    set("--p-correct", profile.p_correct, f.p_correct);
    set("--top-logprobs", profile.top_logprobs, f.top_logprobs);
    set("--ledger-p", profile.ledger_p, f.ledger_p);
  }
  if (!a.base_kind.empty()) {
    profile.base.kind = a.base_kind == "constant"  ? hes::BaseKind::Constant
                        : a.base_kind == "uniform" ? hes::BaseKind::Uniform
                                                   : hes::BaseKind::Exponential;
  }
  if (a.base_value) profile.base.value = *a.base_value;
  if (a.base_low) profile.base.low = *a.base_low;
  if (a.base_high) profile.base.high = *a.base_high;
  if (a.base_rate) profile.base.rate = *a.base_rate;
  if (a.base_cap) profile.base.cap = *a.base_cap;
  if (a.level_min) profile.base.level_min = *a.level_min;
  if (a.level_max) profile.base.level_max = *a.level_max;
  profile.validate();

  std::optional<std::filesystem::path> ledger;
  if (!a.ledger.empty()) ledger = a.ledger;
  const hes::GenerateStats stats = hes::write_generated(profile, a.output, ledger, a.max_bytes);
  ordered_json doc;
  doc["command"] = "synth";
  doc["samples"] = stats.samples;
  doc["tokens"] = stats.tokens;
  doc["bytes"] = stats.bytes;
  doc["output_digest"] = hes::file_digest(a.output);
  if (a.print_profile) doc["profile"] = hes::profile_to_json(profile);
  std::cout << doc.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string manifest;
  std::string scores;
};

void add_verify(CLI::App& app, VerifyArgs& a) {
  auto* cmd = app.add_subcommand("verify", "Check a manifest against its score file and re-derive it");
  cmd->add_option("-m,--manifest", a.manifest, "Manifest (object or array of stratum manifests)")->required();
  cmd->add_option("-s,--scores", a.scores, "Score file the manifest was computed from")->required();
}

int run_verify(const VerifyArgs& a) {
  std::ifstream in(a.manifest);
  if (!in) throw hes::Error(hes::ErrorCode::IoFailure, "cannot open " + a.manifest);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw hes::Error(hes::ErrorCode::MalformedLine, std::string("manifest: ") + e.what());
  }
  std::vector<hes::SelectionManifest> manifests;
  if (doc.is_array()) {
    for (const auto& m : doc) manifests.push_back(hes::manifest_from_json(m));
  } else {
    manifests.push_back(hes::manifest_from_json(doc));
  }
  const std::vector<hes::SampleScore> scores = hes::read_scores(std::filesystem::path(a.scores));
  for (const auto& m : manifests) {
    hes::verify_digest(m, a.scores);
    const hes::SelectionManifest again = hes::rederive(m, scores);
    if (again != m) {
      throw hes::Error(hes::ErrorCode::DigestMismatch,
                       "re-derived selection for " + m.strategy + " differs from the manifest");
    }
  }
  std::cout << "verified " << manifests.size() << " manifest(s) against " << a.scores << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hes: high-entropy-sum scoring and data selection for reasoning corpora"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hes 1.0.0");

  ScoreArgs score_args;
  SelectArgs select_args;
  BatchArgs batch_args;
  AnalyzeArgs analyze_args;
  SynthArgs synth_args;
  VerifyArgs verify_args;
  CLI::App* sft = nullptr;
  CLI::App* rft = nullptr;
  CLI::App* discrim = nullptr;
  CLI::App* dist = nullptr;
  CLI::App* tokens = nullptr;
  CLI::App* agreement = nullptr;
  CLI::App* synth = nullptr;

  add_score(app, score_args);
  add_select(app, select_args, sft, rft);
  add_batch(app, batch_args);
  add_analyze(app, analyze_args, discrim, dist, tokens, agreement);
  add_synth(app, synth_args, synth);
  add_verify(app, verify_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand("score")) return run_score(score_args);
    if (sft->parsed()) return run_select_sft(select_args);
    if (rft->parsed()) return run_select_rft(select_args);
    if (app.got_subcommand("rl-batch")) return run_batch(batch_args);
    if (discrim->parsed()) return run_discrim(analyze_args);
    if (dist->parsed()) return run_dist(analyze_args);
    if (tokens->parsed()) return run_tokens(analyze_args);
    if (agreement->parsed()) return run_agreement(analyze_args);
    if (synth->parsed()) return run_synth(synth_args, synth);
    if (app.got_subcommand("verify")) return run_verify(verify_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  } catch (const hes::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == hes::ErrorCode::InvalidArgument ? kExitUsage : kExitData;
  }
  return kExitUsage;
}
