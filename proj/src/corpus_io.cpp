#include "hes/corpus_io.hpp"

#include <rapidjson/document.h>
#include <rapidjson/error/en.h>
#include <rapidjson/stringbuffer.h>
#include <rapidjson/writer.h>

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <thread>

namespace hes {

namespace {

constexpr unsigned kParseFlags = rapidjson::kParseFullPrecisionFlag;

[[noreturn]] void schema_error(std::size_t line_no, const std::string& field, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, field + ": " + what, line_no);
}

rapidjson::Document parse_object(std::string_view line, std::size_t line_no) {
  rapidjson::Document doc;
  doc.Parse<kParseFlags>(line.data(), line.size());
  if (doc.HasParseError()) {
    throw Error(ErrorCode::MalformedLine,
                std::string(rapidjson::GetParseError_En(doc.GetParseError())) + " at offset " +
                    std::to_string(doc.GetErrorOffset()),
                line_no);
  }
  if (!doc.IsObject()) throw Error(ErrorCode::MalformedLine, "line is not a JSON object", line_no);
  return doc;
}

std::string_view as_view(const rapidjson::Value& v) {
  return {v.GetString(), v.GetStringLength()};
}

std::string required_string(const rapidjson::Value& obj, const char* key, std::size_t line_no) {
  const auto it = obj.FindMember(key);
  if (it == obj.MemberEnd() || !it->value.IsString()) schema_error(line_no, key, "required string");
  return std::string(as_view(it->value));
}

std::optional<double> optional_number(const rapidjson::Value& obj, const char* key,
                                      std::size_t line_no) {
  const auto it = obj.FindMember(key);
  if (it == obj.MemberEnd() || it->value.IsNull()) return std::nullopt;
  if (!it->value.IsNumber()) schema_error(line_no, key, "expected number or null");
  return it->value.GetDouble();
}

std::optional<bool> optional_bool(const rapidjson::Value& obj, const char* key, std::size_t line_no) {
  const auto it = obj.FindMember(key);
  if (it == obj.MemberEnd() || it->value.IsNull()) return std::nullopt;
  if (!it->value.IsBool()) schema_error(line_no, key, "expected bool or null");
  return it->value.GetBool();
}

SampleLabels parse_labels(const rapidjson::Value& obj, std::size_t line_no) {
  SampleLabels labels;
  labels.correct = optional_bool(obj, "correct", line_no);
  labels.difficulty = optional_number(obj, "difficulty", line_no);
  labels.reward = optional_number(obj, "reward", line_no);
  if (labels.difficulty && !(*labels.difficulty >= 0.0 && *labels.difficulty <= 1.0)) {
    schema_error(line_no, "difficulty", "must be in [0, 1]");
  }
  return labels;
}

TokenObservation parse_token(const rapidjson::Value& tok, std::size_t index, std::size_t line_no,
                             std::size_t* clamped) {
  const std::string where = "tokens[" + std::to_string(index) + "]";
  if (!tok.IsObject()) schema_error(line_no, where, "expected object");
  TokenObservation obs;
  for (auto m = tok.MemberBegin(); m != tok.MemberEnd(); ++m) {
    const std::string_view key = as_view(m->name);
    const rapidjson::Value& v = m->value;
    if (key == "id") {
      if (v.IsNull()) continue;
      if (!v.IsInt64()) schema_error(line_no, where + ".id", "expected integer or null");
      obs.id = v.GetInt64();
    } else if (key == "text") {
      if (v.IsNull()) continue;
      if (!v.IsString()) schema_error(line_no, where + ".text", "expected string or null");
      obs.text = std::string(as_view(v));
    } else if (key == "entropy") {
      if (v.IsNull()) continue;
      if (!v.IsNumber()) schema_error(line_no, where + ".entropy", "expected number or null");
      double e = v.GetDouble();
      if (e < 0.0) {
        if (e < -kNegativeEntropyTolerance) {
          throw Error(ErrorCode::NegativeEntropy,
                      where + ".entropy: " + std::to_string(e) + " is negative", line_no);
        }
        e = 0.0;
        if (clamped) ++*clamped;
      }
      obs.entropy = e;
    } else if (key == "top_logprobs") {
      if (v.IsNull()) continue;
      if (!v.IsArray()) schema_error(line_no, where + ".top_logprobs", "expected array or null");
      obs.top_logprobs.reserve(v.Size());
      double mass = 0.0;
      for (const auto& pair : v.GetArray()) {
        if (!pair.IsArray() || pair.Size() != 2 || !pair[0].IsString() || !pair[1].IsNumber()) {
          schema_error(line_no, where + ".top_logprobs", "expected [string, number] pairs");
        }
        const double lp = pair[1].GetDouble();
        mass += std::exp(lp);
        obs.top_logprobs.emplace_back(std::string(as_view(pair[0])), lp);
      }
      if (mass > 1.0 + kMassTolerance) {
        throw Error(ErrorCode::MassExceedsOne,
                    where + ".top_logprobs: mass " + std::to_string(mass) + " exceeds 1", line_no);
      }
    }
  }
  if (!obs.entropy && obs.top_logprobs.empty()) {
    schema_error(line_no, where, "needs entropy or non-empty top_logprobs");
  }
  return obs;
}

std::string raw_json(const rapidjson::Value& v) {
  rapidjson::StringBuffer buffer;
  rapidjson::Writer<rapidjson::StringBuffer> writer(buffer);
  v.Accept(writer);
  return {buffer.GetString(), buffer.GetSize()};
}

void append_optional_number(std::string& out, const std::optional<double>& v) {
  if (v) {
    append_json_number(out, *v);
  } else {
    out += "null";
  }
}

void append_size(std::string& out, std::size_t v) {
  char buf[24];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

void append_labels(std::string& out, const SampleLabels& labels) {
  out += "\"correct\":";
  out += labels.correct ? (*labels.correct ? "true" : "false") : "null";
  out += ",\"difficulty\":";
  append_optional_number(out, labels.difficulty);
  out += ",\"reward\":";
  append_optional_number(out, labels.reward);
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace

void append_json_string(std::string& out, std::string_view s) {
  static constexpr char kHex[] = "0123456789abcdef";
  out += '"';
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          out += "\\u00";
          out += kHex[(c >> 4) & 0xF];
          out += kHex[c & 0xF];
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void append_json_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

SampleRecord parse_record(std::string_view line, std::size_t line_no, std::size_t* clamped) {
  const rapidjson::Document doc = parse_object(line, line_no);
  SampleRecord record;
  record.sample_id = required_string(doc, "sample_id", line_no);
  if (record.sample_id.empty()) schema_error(line_no, "sample_id", "must be non-empty");
  record.query_id = required_string(doc, "query_id", line_no);
  record.labels = parse_labels(doc, line_no);

  const auto tokens = doc.FindMember("tokens");
  if (tokens == doc.MemberEnd() || !tokens->value.IsArray()) {
    schema_error(line_no, "tokens", "required array");
  }
  if (tokens->value.Empty()) schema_error(line_no, "tokens", "must be non-empty");
  record.tokens.reserve(tokens->value.Size());
  std::size_t index = 0;
  for (const auto& tok : tokens->value.GetArray()) {
    record.tokens.push_back(parse_token(tok, index++, line_no, clamped));
  }

  for (auto m = doc.MemberBegin(); m != doc.MemberEnd(); ++m) {
    const std::string_view key = as_view(m->name);
    if (key == "sample_id" || key == "query_id" || key == "correct" || key == "difficulty" ||
        key == "reward" || key == "tokens") {
      continue;
    }
    record.extra_fields.emplace_back(std::string(key), raw_json(m->value));
  }
  return record;
}

std::string record_to_json(const SampleRecord& record) {
  std::string out;
  out.reserve(64 + record.tokens.size() * 48);
  out += "{\"sample_id\":";
  append_json_string(out, record.sample_id);
  out += ",\"query_id\":";
  append_json_string(out, record.query_id);
  out += ',';
  append_labels(out, record.labels);
  out += ",\"tokens\":[";
  for (std::size_t i = 0; i < record.tokens.size(); ++i) {
    const TokenObservation& t = record.tokens[i];
    if (i) out += ',';
    out += "{\"id\":";
    if (t.id) {
      char buf[24];
      const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, *t.id);
      out.append(buf, end);
    } else {
      out += "null";
    }
    out += ",\"text\":";
    if (t.text) {
      append_json_string(out, *t.text);
    } else {
      out += "null";
    }
    out += ",\"entropy\":";
    append_optional_number(out, t.entropy);
    out += ",\"top_logprobs\":";
    if (t.top_logprobs.empty()) {
      out += "null";
    } else {
      out += '[';
      for (std::size_t k = 0; k < t.top_logprobs.size(); ++k) {
        if (k) out += ',';
        out += '[';
        append_json_string(out, t.top_logprobs[k].first);
        out += ',';
        append_json_number(out, t.top_logprobs[k].second);
        out += ']';
      }
      out += ']';
    }
    out += '}';
  }
  out += ']';
  for (const auto& [key, raw] : record.extra_fields) {
    out += ',';
    append_json_string(out, key);
    out += ':';
    out += raw;
  }
  out += '}';
  return out;
}

CorpusReader::CorpusReader(std::istream& in, ReaderOptions options)
    : in_(&in), options_(options) {}

CorpusReader::CorpusReader(const std::filesystem::path& path, ReaderOptions options)
    : owned_(std::make_unique<std::ifstream>(path, std::ios::binary)),
      in_(owned_.get()),
      options_(options) {
  if (!*owned_) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
}

std::optional<SampleRecord> CorpusReader::next() {
  while (std::getline(*in_, line_)) {
    ++line_no_;
    if (is_blank(line_)) continue;
    ++stats_.records_in;
    try {
      SampleRecord record = parse_record(line_, line_no_, &stats_.clamped_entropies);
      if (!seen_ids_.insert(record.sample_id).second) {
        throw Error(ErrorCode::DuplicateSampleId, "duplicate sample_id '" + record.sample_id + "'",
                    line_no_)
            .with_record(record.sample_id);
      }
      ++stats_.records_out;
      return record;
    } catch (const Error& e) {
      if (!options_.skip_invalid) throw;
      stats_.ledger.push_back(e);
    }
  }
  if (in_->bad()) throw Error(ErrorCode::IoFailure, "read failure", line_no_);
  return std::nullopt;
}

std::string score_to_json(const SampleScore& s, bool include_indices) {
  std::string out;
  out.reserve(256 + (include_indices ? s.high_indices.size() * 6 : 0));
  out += "{\"sample_id\":";
  append_json_string(out, s.sample_id);
  out += ",\"query_id\":";
  append_json_string(out, s.query_id);
  out += ",\"n_tokens\":";
  append_size(out, s.n_tokens);
  out += ",\"es\":";
  append_json_number(out, s.es);
  out += ",\"avg_e\":";
  append_json_number(out, s.avg_e);
  out += ",\"hes_rel\":";
  append_json_number(out, s.hes_rel);
  out += ",\"hes_abs\":";
  append_json_number(out, s.hes_abs);
  out += ",\"avg_he\":";
  append_json_number(out, s.avg_he);
  out += ",\"high_count\":";
  append_size(out, s.high_count);
  if (include_indices) {
    out += ",\"high_indices\":[";
    for (std::size_t i = 0; i < s.high_indices.size(); ++i) {
      if (i) out += ',';
      append_size(out, s.high_indices[i]);
    }
    out += ']';
  }
  out += ",\"config\":{\"p\":";
  append_json_number(out, s.config.p);
  out += ",\"tau\":";
  append_json_number(out, s.config.tau);
  out += ",\"tail_mode\":";
  append_json_string(out, to_string(s.config.tail_mode));
  out += "},";
  append_labels(out, s.labels);
  out += '}';
  return out;
}

SampleScore parse_score(std::string_view line, std::size_t line_no) {
  const rapidjson::Document doc = parse_object(line, line_no);
  auto number = [&](const char* key) {
    const auto it = doc.FindMember(key);
    if (it == doc.MemberEnd() || !it->value.IsNumber()) schema_error(line_no, key, "required number");
    return it->value.GetDouble();
  };
  auto count = [&](const char* key) -> std::size_t {
    const auto it = doc.FindMember(key);
    if (it == doc.MemberEnd() || !it->value.IsUint64()) {
      schema_error(line_no, key, "required non-negative integer");
    }
    return it->value.GetUint64();
  };

  SampleScore s;
  s.sample_id = required_string(doc, "sample_id", line_no);
  s.query_id = required_string(doc, "query_id", line_no);
  s.n_tokens = count("n_tokens");
  s.es = number("es");
  s.avg_e = number("avg_e");
  s.hes_rel = number("hes_rel");
  s.hes_abs = number("hes_abs");
  s.avg_he = number("avg_he");
  s.high_count = count("high_count");
  if (const auto it = doc.FindMember("high_indices"); it != doc.MemberEnd() && !it->value.IsNull()) {
    if (!it->value.IsArray()) schema_error(line_no, "high_indices", "expected array");
    for (const auto& v : it->value.GetArray()) {
      if (!v.IsUint64()) schema_error(line_no, "high_indices", "expected non-negative integers");
      s.high_indices.push_back(v.GetUint64());
    }
  }
  const auto cfg = doc.FindMember("config");
  if (cfg == doc.MemberEnd() || !cfg->value.IsObject()) schema_error(line_no, "config", "required object");
  const auto p = cfg->value.FindMember("p");
  const auto tau = cfg->value.FindMember("tau");
  const auto tail = cfg->value.FindMember("tail_mode");
  if (p == cfg->value.MemberEnd() || !p->value.IsNumber() || tau == cfg->value.MemberEnd() ||
      !tau->value.IsNumber() || tail == cfg->value.MemberEnd() || !tail->value.IsString()) {
    schema_error(line_no, "config", "needs p, tau and tail_mode");
  }
  s.config.p = p->value.GetDouble();
  s.config.tau = tau->value.GetDouble();
  try {
    s.config.tail_mode = parse_tail_mode(as_view(tail->value));
  } catch (const Error& e) {
    schema_error(line_no, "config.tail_mode", e.message());
  }
  s.labels = parse_labels(doc, line_no);
  return s;
}

std::size_t write_scores(std::span<const SampleScore> scores, std::ostream& out,
                         bool include_indices) {
  std::string line;
  for (const SampleScore& s : scores) {
    line = score_to_json(s, include_indices);
    line += '\n';
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failure");
  return scores.size();
}

std::size_t write_scores(std::span<const SampleScore> scores, const std::filesystem::path& path,
                         bool include_indices) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  return write_scores(scores, out, include_indices);
}

std::vector<SampleScore> read_scores(std::istream& in) {
  std::vector<SampleScore> scores;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    SampleScore s = parse_score(line, line_no);
    if (!seen.insert(s.sample_id).second) {
      throw Error(ErrorCode::DuplicateSampleId, "duplicate sample_id '" + s.sample_id + "'", line_no);
    }
    scores.push_back(std::move(s));
  }
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failure", line_no);
  return scores;
}

std::vector<SampleScore> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return read_scores(in);
}

namespace {

struct LineResult {
  std::string json;
  std::string sample_id;
  std::optional<Error> error;
  std::size_t tokens = 0;
  std::size_t clamped = 0;
};

void score_line(const std::string& line, std::size_t line_no, const MetricConfig& config,
                bool include_indices, LineResult& result) {
  try {
    const SampleRecord record = parse_record(line, line_no, &result.clamped);
    result.sample_id = record.sample_id;
    result.tokens = record.tokens.size();
    result.json = score_to_json(score_sample(record, config), include_indices);
  } catch (const Error& e) {
    result.error = e.line() ? e : e.with_line(line_no);
  }
}

}  // namespace

ScoreRunStats score_corpus(std::istream& in, std::ostream& out, const MetricConfig& config,
                           const ScoreRunOptions& options) {
  config.validate();
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  ScoreRunStats stats;
  std::unordered_set<std::string> seen_ids;

  std::vector<std::string> lines;
  std::vector<std::size_t> line_numbers;
  std::vector<LineResult> results;
  std::size_t line_no = 0;
  std::string line;
  bool eof = false;

  while (!eof) {
    lines.clear();
    line_numbers.clear();
    std::size_t bytes = 0;
    while (lines.size() < options.chunk_lines && bytes < options.chunk_bytes) {
      if (!std::getline(in, line)) {
        eof = true;
        break;
      }
      ++line_no;
      if (is_blank(line)) continue;
      bytes += line.size();
      lines.push_back(std::move(line));
      line_numbers.push_back(line_no);
    }
    if (in.bad()) throw Error(ErrorCode::IoFailure, "read failure", line_no);
    if (lines.empty()) continue;

    results.assign(lines.size(), LineResult{});
    const std::size_t n = lines.size();
    const std::size_t active = std::min(workers, n);
    auto run_range = [&](std::size_t w) {
      const std::size_t begin = n * w / active;
      const std::size_t end = n * (w + 1) / active;
      for (std::size_t i = begin; i < end; ++i) {
        score_line(lines[i], line_numbers[i], config, options.include_indices, results[i]);
      }
    };
    {
      std::vector<std::jthread> threads;
      threads.reserve(active - 1);
      for (std::size_t w = 1; w < active; ++w) threads.emplace_back(run_range, w);
      run_range(0);
    }

    for (std::size_t i = 0; i < n; ++i) {
      LineResult& r = results[i];
      ++stats.records_in;
      if (!r.error && !seen_ids.insert(r.sample_id).second) {
        r.error = Error(ErrorCode::DuplicateSampleId, "duplicate sample_id '" + r.sample_id + "'",
                        line_numbers[i])
                      .with_record(r.sample_id);
      }
      if (r.error) {
        if (!options.skip_invalid) throw *r.error;
        stats.ledger.push_back(*r.error);
        continue;
      }
      r.json += '\n';
      out.write(r.json.data(), static_cast<std::streamsize>(r.json.size()));
      ++stats.records_out;
      stats.tokens += r.tokens;
      stats.clamped_entropies += r.clamped;
    }
    if (!out) throw Error(ErrorCode::IoFailure, "write failure");
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failure");
  return stats;
}

ScoreRunStats score_corpus(const std::filesystem::path& in, const std::filesystem::path& out,
                           const MetricConfig& config, const ScoreRunOptions& options) {
  std::ifstream is(in, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open " + in.string());
  std::ofstream os(out, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot open " + out.string() + " for writing");
  return score_corpus(is, os, config, options);
}

}  // namespace hes
