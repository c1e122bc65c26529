#include "hes/synth.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "hes/corpus_io.hpp"
#include "hes/entropy.hpp"
#include "hes/error.hpp"
#include "hes/rng.hpp"

namespace hes {

namespace {

constexpr std::array<const char*, 16> kVocabulary = {
    "the", "so", "we", "then", "=", "+", "x", "is", "of", "to", "and", "that", "let", "2", "1", "thus",
};
constexpr std::int64_t kSpikeIdBase = 100000;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidProfile, what); }

double draw_base(const BaseEntropy& base, Rng& rng) {
  switch (base.kind) {
    case BaseKind::Constant: return base.value;
    case BaseKind::Uniform: return rng.uniform(base.low, base.high);
    case BaseKind::Exponential: {
      double x = rng.exponential(base.rate);
      while (x >= base.cap) x = rng.exponential(base.rate);
      return x;
    }
  }
  return 0.0;
}

std::size_t spike_count(const SpikeModel& spikes, bool correct, Rng& rng) {
  const double mean = correct ? spikes.mean_count : spikes.mean_count * spikes.incorrect_multiplier;
  if (spikes.poisson) return static_cast<std::size_t>(rng.poisson(mean));
  return static_cast<std::size_t>(std::llround(mean));
}

/// Distinct positions in [0, n), ascending (Floyd's algorithm).
std::vector<std::size_t> distinct_positions(std::size_t count, std::size_t n, Rng& rng) {
  std::set<std::size_t> chosen;
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = static_cast<std::size_t>(rng.below(j + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

/// Geometric top-k distribution whose spread grows with `entropy`.
std::vector<std::pair<std::string, double>> synthetic_logprobs(double entropy, std::size_t k) {
  const double r = std::clamp(1.0 - std::exp(-entropy), 1e-4, 0.999);
  const double log_head = std::log1p(-r);
  const double log_r = std::log(r);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.emplace_back("t" + std::to_string(i), log_head + static_cast<double>(i) * log_r);
  }
  return out;
}

void predict(const GeneratorProfile& profile, const std::vector<double>& entropies,
             LedgerEntry& entry) {
  if (profile.top_logprobs > 0) return;
  const std::size_t n = entropies.size();
  const std::size_t m = high_entropy_count(n, profile.ledger_p);
  std::vector<std::size_t> high;
  if (entry.spikes.size() >= m) {
    std::vector<const PlantedSpike*> ranked;
    for (const PlantedSpike& s : entry.spikes) ranked.push_back(&s);
    std::sort(ranked.begin(), ranked.end(), [](const PlantedSpike* a, const PlantedSpike* b) {
      if (a->magnitude != b->magnitude) return a->magnitude > b->magnitude;
      return a->position < b->position;
    });
    for (std::size_t i = 0; i < m; ++i) high.push_back(ranked[i]->position);
  } else if (profile.base.kind == BaseKind::Constant) {
    std::size_t s = 0;
    std::size_t fill = m - entry.spikes.size();
    for (std::size_t t = 0; t < n; ++t) {
      if (s < entry.spikes.size() && entry.spikes[s].position == t) {
        high.push_back(t);
        ++s;
      } else if (fill > 0) {
        high.push_back(t);
        --fill;
      }
    }
  } else {
    return;
  }
  std::sort(high.begin(), high.end());
  double sum = 0.0;
  for (const std::size_t t : high) sum += entropies[t];
  entry.expected_hes_rel = sum;
  entry.expected_high_indices = std::move(high);
}

GeneratedSample generate_sample(const GeneratorProfile& profile, std::size_t query,
                                std::size_t candidate, double difficulty, Rng& rng) {
  GeneratedSample out;
  SampleRecord& rec = out.record;
  LedgerEntry& led = out.ledger;
  rec.query_id = synth_query_id(query);
  rec.sample_id = synth_sample_id(query, candidate);
  const bool correct = rng.bernoulli(profile.p_correct);
  rec.labels.correct = correct;
  rec.labels.reward = correct ? 1.0 : 0.0;
  rec.labels.difficulty = difficulty;

  const SpikeModel& sm = profile.spikes;
  std::size_t n = static_cast<std::size_t>(
      rng.between(static_cast<std::int64_t>(profile.min_tokens), static_cast<std::int64_t>(profile.max_tokens)));
  const std::size_t spikes = spike_count(sm, correct, rng);
  for (std::size_t i = 0; i < spikes; ++i) {
    n += static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(sm.tokens_min), static_cast<std::int64_t>(sm.tokens_max)));
  }
  n = std::max<std::size_t>(n, 1);
  const std::size_t placed = std::min(spikes, n);
  const double level = rng.uniform(profile.base.level_min, profile.base.level_max);

  const std::vector<std::size_t> positions = distinct_positions(placed, n, rng);
  for (const std::size_t pos : positions) {
    PlantedSpike s;
    s.position = pos;
    s.magnitude = rng.uniform(sm.magnitude_min, sm.magnitude_max);
    s.text = sm.planted_texts.empty()
                 ? std::string("<fork>")
                 : sm.planted_texts[static_cast<std::size_t>(rng.below(sm.planted_texts.size()))];
    led.spikes.push_back(std::move(s));
  }

  std::vector<double> entropies(n);
  rec.tokens.resize(n);
  std::size_t next_spike = 0;
  for (std::size_t t = 0; t < n; ++t) {
    TokenObservation& tok = rec.tokens[t];
    if (next_spike < led.spikes.size() && led.spikes[next_spike].position == t) {
      const PlantedSpike& s = led.spikes[next_spike++];
      entropies[t] = s.magnitude;
      tok.text = s.text;
      const auto it = std::find(sm.planted_texts.begin(), sm.planted_texts.end(), s.text);
      tok.id = kSpikeIdBase + static_cast<std::int64_t>(it - sm.planted_texts.begin());
    } else {
      entropies[t] = draw_base(profile.base, rng) * level;
      const std::size_t w = static_cast<std::size_t>(rng.below(kVocabulary.size()));
      tok.text = kVocabulary[w];
      tok.id = static_cast<std::int64_t>(w);
    }
    if (profile.top_logprobs > 0) {
      tok.top_logprobs = synthetic_logprobs(entropies[t], profile.top_logprobs);
    } else {
      tok.entropy = entropies[t];
    }
  }

  led.sample_id = rec.sample_id;
  led.query_id = rec.query_id;
  led.correct = correct;
  led.n_tokens = n;
  predict(profile, entropies, led);
  return out;
}

}  // namespace

double BaseEntropy::support_max() const {
  double top = 0.0;
  switch (kind) {
    case BaseKind::Constant: top = value; break;
    case BaseKind::Uniform: top = high; break;
    case BaseKind::Exponential: top = cap; break;
  }
  return top * level_max;
}

void GeneratorProfile::validate() const {
  if (candidates_per_query < 1) invalid("candidates_per_query must be >= 1");
  if (min_tokens < 1 || max_tokens < min_tokens) invalid("need 1 <= min_tokens <= max_tokens");
  if (!(p_correct >= 0.0 && p_correct <= 1.0)) invalid("p_correct must be in [0, 1]");
  if (!(ledger_p > 0.0 && ledger_p <= 1.0)) invalid("ledger_p must be in (0, 1]");
  if (!(base.level_min > 0.0 && base.level_max >= base.level_min)) {
    invalid("need 0 < level_min <= level_max");
  }
  switch (base.kind) {
    case BaseKind::Constant:
      if (!(base.value >= 0.0) || !std::isfinite(base.value)) invalid("constant base must be finite and >= 0");
      break;
    case BaseKind::Uniform:
      if (!(base.low >= 0.0 && base.high > base.low) || !std::isfinite(base.high)) {
        invalid("uniform base needs 0 <= low < high");
      }
      break;
    case BaseKind::Exponential:
      if (!(base.rate > 0.0)) invalid("exponential base needs rate > 0");
      if (!(base.cap > 0.0)) invalid("exponential cap must be > 0");
      break;
  }
  if (!(spikes.mean_count >= 0.0) || !(spikes.incorrect_multiplier >= 0.0)) {
    invalid("spike counts must be non-negative");
  }
  if (spikes.tokens_max < spikes.tokens_min) invalid("need tokens_min <= tokens_max");
  if (spikes.mean_count > 0.0 || spikes.incorrect_multiplier * spikes.mean_count > 0.0) {
    if (!(spikes.magnitude_max >= spikes.magnitude_min)) invalid("need magnitude_min <= magnitude_max");
    if (!(spikes.magnitude_min > base.support_max())) {
      invalid("spike magnitudes must lie strictly above the base entropy support");
    }
  }
}

nlohmann::json profile_to_json(const GeneratorProfile& p) {
  auto kind = [](BaseKind k) {
    return k == BaseKind::Constant ? "constant" : k == BaseKind::Uniform ? "uniform" : "exponential";
  };
  nlohmann::json base = {{"kind", kind(p.base.kind)}, {"value", p.base.value}, {"low", p.base.low},
                         {"high", p.base.high},       {"rate", p.base.rate},   {"level_min", p.base.level_min},
                         {"level_max", p.base.level_max}};
  base["cap"] = std::isfinite(p.base.cap) ? nlohmann::json(p.base.cap) : nlohmann::json(nullptr);
  return {
      {"seed", p.seed},
      {"n_queries", p.n_queries},
      {"candidates_per_query", p.candidates_per_query},
      {"min_tokens", p.min_tokens},
      {"max_tokens", p.max_tokens},
      {"base", base},
      {"spikes",
       {{"mean_count", p.spikes.mean_count},
        {"poisson", p.spikes.poisson},
        {"incorrect_multiplier", p.spikes.incorrect_multiplier},
        {"magnitude_min", p.spikes.magnitude_min},
        {"magnitude_max", p.spikes.magnitude_max},
        {"tokens_min", p.spikes.tokens_min},
        {"tokens_max", p.spikes.tokens_max},
        {"planted_texts", p.spikes.planted_texts}}},
      {"p_correct", p.p_correct},
      {"top_logprobs", p.top_logprobs},
      {"ledger_p", p.ledger_p},
  };
}

GeneratorProfile profile_from_json(const nlohmann::json& doc) {
  GeneratorProfile p;
  try {
    auto get = [&](const nlohmann::json& obj, const char* key, auto& field) {
      if (obj.contains(key) && !obj.at(key).is_null()) {
        field = obj.at(key).get<std::remove_reference_t<decltype(field)>>();
      }
    };
    get(doc, "seed", p.seed);
    get(doc, "n_queries", p.n_queries);
    get(doc, "candidates_per_query", p.candidates_per_query);
    get(doc, "min_tokens", p.min_tokens);
    get(doc, "max_tokens", p.max_tokens);
    get(doc, "p_correct", p.p_correct);
    get(doc, "top_logprobs", p.top_logprobs);
    get(doc, "ledger_p", p.ledger_p);
    if (doc.contains("base")) {
      const auto& b = doc.at("base");
      if (b.contains("kind")) {
        const std::string k = b.at("kind").get<std::string>();
        if (k == "constant") {
          p.base.kind = BaseKind::Constant;
        } else if (k == "uniform") {
          p.base.kind = BaseKind::Uniform;
        } else if (k == "exponential") {
          p.base.kind = BaseKind::Exponential;
        } else {
          invalid("unknown base kind '" + k + "'");
        }
      }
      get(b, "value", p.base.value);
      get(b, "low", p.base.low);
      get(b, "high", p.base.high);
      get(b, "rate", p.base.rate);
      get(b, "cap", p.base.cap);
      get(b, "level_min", p.base.level_min);
      get(b, "level_max", p.base.level_max);
    }
    if (doc.contains("spikes")) {
      const auto& s = doc.at("spikes");
      get(s, "mean_count", p.spikes.mean_count);
      get(s, "poisson", p.spikes.poisson);
      get(s, "incorrect_multiplier", p.spikes.incorrect_multiplier);
      get(s, "magnitude_min", p.spikes.magnitude_min);
      get(s, "magnitude_max", p.spikes.magnitude_max);
      get(s, "tokens_min", p.spikes.tokens_min);
      get(s, "tokens_max", p.spikes.tokens_max);
      get(s, "planted_texts", p.spikes.planted_texts);
    }
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("profile: ") + e.what());
  }
  p.validate();
  return p;
}

std::string ledger_to_json(const LedgerEntry& e) {
  std::string out = "{\"sample_id\":";
  append_json_string(out, e.sample_id);
  out += ",\"query_id\":";
  append_json_string(out, e.query_id);
  out += ",\"correct\":";
  out += e.correct ? "true" : "false";
  out += ",\"n_tokens\":" + std::to_string(e.n_tokens);
  out += ",\"spikes\":[";
  for (std::size_t i = 0; i < e.spikes.size(); ++i) {
    if (i) out += ',';
    out += "{\"position\":" + std::to_string(e.spikes[i].position) + ",\"magnitude\":";
    append_json_number(out, e.spikes[i].magnitude);
    out += ",\"text\":";
    append_json_string(out, e.spikes[i].text);
    out += '}';
  }
  out += "],\"expected\":";
  if (e.expected_hes_rel) {
    out += "{\"hes_rel\":";
    append_json_number(out, *e.expected_hes_rel);
    out += ",\"high_indices\":[";
    for (std::size_t i = 0; i < e.expected_high_indices->size(); ++i) {
      if (i) out += ',';
      out += std::to_string((*e.expected_high_indices)[i]);
    }
    out += "]}";
  } else {
    out += "null";
  }
  out += '}';
  return out;
}

std::string synth_query_id(std::size_t query) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%07zu", query);
  return buf;
}

std::string synth_sample_id(std::size_t query, std::size_t candidate) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "q%07zu-c%04zu", query, candidate);
  return buf;
}

CorpusGenerator::CorpusGenerator(GeneratorProfile profile) : profile_(std::move(profile)) {
  profile_.validate();
}

void CorpusGenerator::fill_query() {
  pending_.clear();
  cursor_ = 0;
  Rng rng(derive_seed(profile_.seed, synth_query_id(query_)));
  const double difficulty = rng.uniform();
  for (std::size_t c = 0; c < profile_.candidates_per_query; ++c) {
    pending_.push_back(generate_sample(profile_, query_, c, difficulty, rng));
  }
  ++query_;
}

std::optional<GeneratedSample> CorpusGenerator::next() {
  if (cursor_ >= pending_.size()) {
    if (query_ >= profile_.n_queries) return std::nullopt;
    fill_query();
  }
  return std::move(pending_[cursor_++]);
}

std::vector<GeneratedSample> generate(const GeneratorProfile& profile) {
  CorpusGenerator gen(profile);
  std::vector<GeneratedSample> out;
  while (auto s = gen.next()) out.push_back(std::move(*s));
  return out;
}

GenerateStats write_generated(const GeneratorProfile& profile, const std::filesystem::path& corpus,
                              const std::optional<std::filesystem::path>& ledger,
                              std::optional<std::size_t> max_bytes) {
  std::ofstream out(corpus, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + corpus.string() + " for writing");
  std::ofstream led;
  if (ledger) {
    led.open(*ledger, std::ios::binary | std::ios::trunc);
    if (!led) throw Error(ErrorCode::IoFailure, "cannot open " + ledger->string() + " for writing");
  }
  GenerateStats stats;
  CorpusGenerator gen(profile);
  while (auto s = gen.next()) {
    if (max_bytes && stats.bytes >= *max_bytes) break;
    std::string line = record_to_json(s->record);
    line += '\n';
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    if (ledger) led << ledger_to_json(s->ledger) << '\n';
    ++stats.samples;
    stats.tokens += s->record.tokens.size();
    stats.bytes += line.size();
  }
  out.flush();
  if (!out || (ledger && !led)) throw Error(ErrorCode::IoFailure, "write failure");
  return stats;
}

}  // namespace hes
