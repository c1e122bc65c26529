#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hes {

/// Audited result of any selection run.
struct SelectionManifest {
  std::string strategy;
  nlohmann::json params = nlohmann::json::object();
  /// Metric value of the last admitted sample; set only by score-threshold strategies.
  std::optional<double> threshold;
  std::vector<std::string> selected;
  std::size_t rejected_count = 0;
  std::string corpus_digest;
  std::optional<std::uint64_t> seed;
  /// Strategy-specific extras (per-query counts, derived budget, stratum label).
  nlohmann::json details = nlohmann::json::object();

  friend bool operator==(const SelectionManifest&, const SelectionManifest&) = default;
};

nlohmann::ordered_json manifest_to_json(const SelectionManifest& manifest);
SelectionManifest manifest_from_json(const nlohmann::json& doc);

void write_manifest(const SelectionManifest& manifest, const std::filesystem::path& path);
SelectionManifest read_manifest(const std::filesystem::path& path);

/// "sha256:<hex>" over the file's bytes.
std::string file_digest(const std::filesystem::path& path);
std::string bytes_digest(std::string_view bytes);

/// Throws DigestMismatch unless `score_file` hashes to the manifest's digest.
void verify_digest(const SelectionManifest& manifest, const std::filesystem::path& score_file);

}  // namespace hes
