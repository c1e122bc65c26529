#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hes {

enum class ErrorCode {
  EmptyDistribution,
  MassExceedsOne,
  NegativeEntropy,
  EmptySequence,
  InvalidArgument,
  MalformedLine,
  SchemaViolation,
  DuplicateSampleId,
  IoFailure,
  DigestMismatch,
  MissingField,
  EmptyCorpus,
  MissingCorrectLabel,
  EmptyGroup,
  GroupTooSmall,
  SingleClassInput,
  IdSetMismatch,
  InvalidProfile,
};

/// Stable name used in CLI messages and by host-language bindings.
std::string_view error_code_name(ErrorCode code);

/// Every failure in the toolkit is reported through this type. Ingest errors
/// carry the 1-based line number; per-record errors carry the record id.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message);
  Error(ErrorCode code, std::string message, std::size_t line);

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  const std::optional<std::size_t>& line() const noexcept { return line_; }
  const std::optional<std::string>& record_id() const noexcept { return record_id_; }

  Error with_line(std::size_t line) const;
  Error with_record(std::string id) const;

 private:
  Error(ErrorCode code, std::string message, std::optional<std::size_t> line,
        std::optional<std::string> record_id);

  static std::string format(ErrorCode code, const std::string& message,
                            const std::optional<std::size_t>& line,
                            const std::optional<std::string>& record_id);

  ErrorCode code_;
  std::string message_;
  std::optional<std::size_t> line_;
  std::optional<std::string> record_id_;
};

}  // namespace hes
