#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace limbsense {

enum class ErrorKind {
  MalformedRow,
  NonMonotonicTime,
  RateMismatch,
  ScoreOutOfRange,
  UnknownWeek,
  SessionTooShort,
  EmptyInput,
  NoDominantFrequency,
  EmptyWindow,
  NoReferenceActivity,
  DegenerateSplit,
  TooFewGroups,
  SingleClassTraining,
  NonFiniteFeature,
  DimensionMismatch,
  SingleClassLabels,
  ConstantInput,
  IoFailure,
  ConfigError,
  LabelUnavailable,
  ModelFormat,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-checkable error kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace limbsense
