#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rentyield {

enum class Errc {
  InvalidArgument,
  InvalidListing,
  InvalidBaseUrl,
  NetworkError,
  AuthError,
  FixtureMissing,
  RateLimited,
  MalformedPayload,
  EmptyElementList,
  MissingRequiredField,
  NonNumericField,
  EmptyDataset,
  IoError,
  SchemaViolation,
  NonRepayable,
  UnknownNeighborhood,
  NoUsableRows,
  RankDeficient,
  TooFewRows,
  SpecMismatch,
  DimensionMismatch,
  LengthMismatch,
  NoScorableListings,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidListing: return "InvalidListing";
    case Errc::InvalidBaseUrl: return "InvalidBaseUrl";
    case Errc::NetworkError: return "NetworkError";
    case Errc::AuthError: return "AuthError";
    case Errc::FixtureMissing: return "FixtureMissing";
    case Errc::RateLimited: return "RateLimited";
    case Errc::MalformedPayload: return "MalformedPayload";
    case Errc::EmptyElementList: return "EmptyElementList";
    case Errc::MissingRequiredField: return "MissingRequiredField";
    case Errc::NonNumericField: return "NonNumericField";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::IoError: return "IoError";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::NonRepayable: return "NonRepayable";
    case Errc::UnknownNeighborhood: return "UnknownNeighborhood";
    case Errc::NoUsableRows: return "NoUsableRows";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::SpecMismatch: return "SpecMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NoScorableListings: return "NoScorableListings";
  }
  return "Unknown";
}

// Every domain failure in the library is reported as an Error carrying a
// machine-readable code. `details` holds names (fields, columns,
// neighborhoods) relevant to the failure; `line` is set for file positions.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::vector<std::string> details = {},
        std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        details_(std::move(details)),
        line_(line) {}

  Errc code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  Errc code_;
  std::vector<std::string> details_;
  std::optional<std::size_t> line_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message,
                              std::vector<std::string> details = {}) {
  throw Error(code, message, std::move(details));
}

}  // namespace rentyield
