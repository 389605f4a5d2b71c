#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace approxtree {

enum class ErrorKind {
  InvalidArgument,
  ParseError,
  SchemaViolation,
  ThresholdOutsideRegion,
  DatasetTooSmall,
  EmptyNodeSupport,
  RejectionOverflow,
  NegativeVariance,
  InvalidP,
  NoCandidates,
  NoValidSplit,
  SingularCovariance,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::ThresholdOutsideRegion: return "ThresholdOutsideRegion";
    case ErrorKind::DatasetTooSmall: return "DatasetTooSmall";
    case ErrorKind::EmptyNodeSupport: return "EmptyNodeSupport";
    case ErrorKind::RejectionOverflow: return "RejectionOverflow";
    case ErrorKind::NegativeVariance: return "NegativeVariance";
    case ErrorKind::InvalidP: return "InvalidP";
    case ErrorKind::NoCandidates: return "NoCandidates";
    case ErrorKind::NoValidSplit: return "NoValidSplit";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a kind so the CLI can report
/// the error class and tests can match on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace approxtree
