#include "hes/error.hpp"

namespace hes {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyDistribution: return "EmptyDistribution";
    case ErrorCode::MassExceedsOne: return "MassExceedsOne";
    case ErrorCode::NegativeEntropy: return "NegativeEntropy";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::MissingCorrectLabel: return "MissingCorrectLabel";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::SingleClassInput: return "SingleClassInput";
    case ErrorCode::IdSetMismatch: return "IdSetMismatch";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string message)
    : Error(code, std::move(message), std::nullopt, std::nullopt) {}

Error::Error(ErrorCode code, std::string message, std::size_t line)
    : Error(code, std::move(message), std::optional<std::size_t>(line), std::nullopt) {}

Error::Error(ErrorCode code, std::string message, std::optional<std::size_t> line,
             std::optional<std::string> record_id)
    : std::runtime_error(format(code, message, line, record_id)),
      code_(code),
      message_(std::move(message)),
      line_(line),
      record_id_(std::move(record_id)) {}

Error Error::with_line(std::size_t line) const { return Error(code_, message_, line, record_id_); }

Error Error::with_record(std::string id) const { return Error(code_, message_, line_, std::move(id)); }

std::string Error::format(ErrorCode code, const std::string& message,
                          const std::optional<std::size_t>& line,
                          const std::optional<std::string>& record_id) {
  std::string out(error_code_name(code));
  if (line) out += " at line " + std::to_string(*line);
  if (record_id) out += " (record " + *record_id + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace hes
