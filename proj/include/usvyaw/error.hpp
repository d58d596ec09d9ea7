#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace usvyaw {

enum class ErrorCode {
  InvalidParams,
  InvalidSamplePeriod,
  SampleRateMismatch,
  IntegratorError,
  InvalidWaveSpec,
  ParseError,
  NonUniformSampling,
  NonFiniteValue,
  TooFewSamples,
  SplitTooSmall,
  LengthMismatch,
  ConstantReference,
  RankDeficientRegression,
  DivergedNonFinite,
  NoDescentDirection,
  IoFailure,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InvalidSamplePeriod: return "InvalidSamplePeriod";
    case ErrorCode::SampleRateMismatch: return "SampleRateMismatch";
    case ErrorCode::IntegratorError: return "IntegratorError";
    case ErrorCode::InvalidWaveSpec: return "InvalidWaveSpec";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonUniformSampling: return "NonUniformSampling";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::SplitTooSmall: return "SplitTooSmall";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConstantReference: return "ConstantReference";
    case ErrorCode::RankDeficientRegression: return "RankDeficientRegression";
    case ErrorCode::DivergedNonFinite: return "DivergedNonFinite";
    case ErrorCode::NoDescentDirection: return "NoDescentDirection";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the toolkit. The message is
/// prefixed with the error name so callers printing `what()` always see it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed CSV or model file content. Row and column are 1-based; zero
/// means "not applicable".
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t column, const std::string& detail)
      : Error(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " +
                                         std::to_string(column) + ": " + detail),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// Estimation failure carrying the last parameter vector (K, a1, a0) whose
/// objective was finite, when one exists.
class EstimationError : public Error {
 public:
  EstimationError(ErrorCode code, const std::string& detail,
                  std::optional<std::array<double, 3>> last_good = std::nullopt)
      : Error(code, detail), last_good_(last_good) {}

  const std::optional<std::array<double, 3>>& last_good() const noexcept { return last_good_; }

 private:
  std::optional<std::array<double, 3>> last_good_;
};

}  // namespace usvyaw
