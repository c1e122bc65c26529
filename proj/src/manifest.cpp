#include "hes/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "hes/error.hpp"

namespace hes {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw Error(ErrorCode::IoFailure, "sha256 init failed");
    }
  }

  void update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx_.get(), data, size) != 1) {
      throw Error(ErrorCode::IoFailure, "sha256 update failed");
    }
  }

  std::string hex_digest() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) {
      throw Error(ErrorCode::IoFailure, "sha256 final failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out = "sha256:";
    for (unsigned int i = 0; i < len; ++i) {
      out += kHex[md[i] >> 4];
      out += kHex[md[i] & 0xF];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string bytes_digest(std::string_view bytes) {
  Sha256 sha;
  sha.update(bytes.data(), bytes.size());
  return sha.hex_digest();
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  Sha256 sha;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) sha.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failure on " + path.string());
  return sha.hex_digest();
}

nlohmann::ordered_json manifest_to_json(const SelectionManifest& m) {
  nlohmann::ordered_json doc;
  doc["strategy"] = m.strategy;
  doc["params"] = m.params;
  doc["threshold"] = m.threshold ? nlohmann::ordered_json(*m.threshold) : nlohmann::ordered_json(nullptr);
  doc["selected"] = m.selected;
  doc["rejected_count"] = m.rejected_count;
  doc["corpus_digest"] = m.corpus_digest;
  doc["seed"] = m.seed ? nlohmann::ordered_json(*m.seed) : nlohmann::ordered_json(nullptr);
  doc["details"] = m.details;
  return doc;
}

SelectionManifest manifest_from_json(const nlohmann::json& doc) {
  try {
    SelectionManifest m;
    m.strategy = doc.at("strategy").get<std::string>();
    m.params = doc.at("params");
    if (!doc.at("threshold").is_null()) m.threshold = doc.at("threshold").get<double>();
    m.selected = doc.at("selected").get<std::vector<std::string>>();
    m.rejected_count = doc.at("rejected_count").get<std::size_t>();
    m.corpus_digest = doc.at("corpus_digest").get<std::string>();
    if (!doc.at("seed").is_null()) m.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("details")) m.details = doc.at("details");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("manifest: ") + e.what());
  }
}

void write_manifest(const SelectionManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failure on " + path.string());
}

SelectionManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedLine, std::string("manifest: ") + e.what());
  }
  return manifest_from_json(doc);
}

void verify_digest(const SelectionManifest& manifest, const std::filesystem::path& score_file) {
  const std::string actual = file_digest(score_file);
  if (actual != manifest.corpus_digest) {
    throw Error(ErrorCode::DigestMismatch, "manifest was computed from " + manifest.corpus_digest +
                                               " but " + score_file.string() + " is " + actual);
  }
}

}  // namespace hes
