#pragma once

// Line-delimited ingest and egress.
//
// Corpus line:
//   {"sample_id": str, "query_id": str, "correct": bool|null,
//    "difficulty": number|null, "reward": number|null,
//    "tokens": [{"id": int|null, "text": str|null, "entropy": number|null,
//                "top_logprobs": [[str, number], ...]|null}, ...]}
//
// Score line (fixed field order):
//   {"sample_id", "query_id", "n_tokens", "es", "avg_e", "hes_rel", "hes_abs",
//    "avg_he", "high_count", ["high_indices",] "config": {"p", "tau", "tail_mode"},
//    "correct", "difficulty", "reward"}

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hes/entropy.hpp"
#include "hes/error.hpp"
#include "hes/record.hpp"

namespace hes {

struct ReaderOptions {
  /// Collect invalid records in the ledger instead of throwing.
  bool skip_invalid = false;
};

struct IngestStats {
  std::size_t records_in = 0;
  std::size_t records_out = 0;
  std::size_t clamped_entropies = 0;
  std::vector<Error> ledger;
};

/// Parses and validates one corpus line. Id uniqueness is checked by the
/// reader, not here. `clamped` is incremented for every negative entropy
/// within tolerance that was clamped to zero.
SampleRecord parse_record(std::string_view line, std::size_t line_no,
                          std::size_t* clamped = nullptr);

std::string record_to_json(const SampleRecord& record);

/// Single-consumer streaming reader. Holds one line at a time plus the set
/// of sample ids seen so far.
class CorpusReader {
 public:
  explicit CorpusReader(std::istream& in, ReaderOptions options = {});
  explicit CorpusReader(const std::filesystem::path& path, ReaderOptions options = {});

  std::optional<SampleRecord> next();

  const IngestStats& stats() const noexcept { return stats_; }

 private:
  std::unique_ptr<std::ifstream> owned_;
  std::istream* in_;
  ReaderOptions options_;
  std::size_t line_no_ = 0;
  std::string line_;
  std::unordered_set<std::string> seen_ids_;
  IngestStats stats_;
};

std::string score_to_json(const SampleScore& score, bool include_indices);
SampleScore parse_score(std::string_view line, std::size_t line_no);

std::size_t write_scores(std::span<const SampleScore> scores, std::ostream& out,
                         bool include_indices = false);
std::size_t write_scores(std::span<const SampleScore> scores, const std::filesystem::path& path,
                         bool include_indices = false);
std::vector<SampleScore> read_scores(const std::filesystem::path& path);
std::vector<SampleScore> read_scores(std::istream& in);

struct ScoreRunOptions {
  std::size_t workers = 1;
  bool include_indices = false;
  bool skip_invalid = false;
  /// Upper bounds on one in-flight chunk.
  std::size_t chunk_lines = 4096;
  std::size_t chunk_bytes = std::size_t{32} << 20;
};

struct ScoreRunStats {
  std::size_t records_in = 0;
  std::size_t records_out = 0;
  std::size_t tokens = 0;
  std::size_t clamped_entropies = 0;
  std::vector<Error> ledger;
};

/// Streams a corpus into a score file. Lines are processed in bounded chunks
/// whose records are parsed and scored by `workers` threads; output keeps
/// input order, so the bytes written do not depend on the worker count.
ScoreRunStats score_corpus(std::istream& in, std::ostream& out, const MetricConfig& config,
                           const ScoreRunOptions& options = {});
ScoreRunStats score_corpus(const std::filesystem::path& in, const std::filesystem::path& out,
                           const MetricConfig& config, const ScoreRunOptions& options = {});

/// JSON string literal with escaping, including the quotes.
void append_json_string(std::string& out, std::string_view s);
/// Shortest round-trip decimal for a finite double.
void append_json_number(std::string& out, double v);

}  // namespace hes
