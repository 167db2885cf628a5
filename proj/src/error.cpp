#include "limbsense/error.hpp"

namespace limbsense {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorKind::RateMismatch: return "RateMismatch";
    case ErrorKind::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorKind::UnknownWeek: return "UnknownWeek";
    case ErrorKind::SessionTooShort: return "SessionTooShort";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoDominantFrequency: return "NoDominantFrequency";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::NoReferenceActivity: return "NoReferenceActivity";
    case ErrorKind::DegenerateSplit: return "DegenerateSplit";
    case ErrorKind::TooFewGroups: return "TooFewGroups";
    case ErrorKind::SingleClassTraining: return "SingleClassTraining";
    case ErrorKind::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingleClassLabels: return "SingleClassLabels";
    case ErrorKind::ConstantInput: return "ConstantInput";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::LabelUnavailable: return "LabelUnavailable";
    case ErrorKind::ModelFormat: return "ModelFormat";
  }
  return "Unknown";
}

}  // namespace limbsense
