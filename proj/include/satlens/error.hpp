#pragma once

#include <stdexcept>
#include <string>

namespace satlens {

enum class ErrorKind {
  DomainError,
  DimensionError,
  DimensionMismatch,
  NonSquare,
  AsymmetricInput,
  NoConvergence,
  EmptyAccumulator,
  ZeroVariance,
  ShapeMismatch,
  MissingEigenspace,
  NonFiniteLoss,
  UnsupportedTopology,
  BadMagic,
  TruncatedFile,
  CountMismatch,
  DegenerateLabels,
  DegenerateBaseline,
  TooFewLayers,
  TooFewPairs,
  NoQualifyingDelta,
  ConfigError,
  DatasetNotFound,
  BadBundle,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::DimensionError: return "DimensionError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonSquare: return "NonSquare";
    case ErrorKind::AsymmetricInput: return "AsymmetricInput";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::EmptyAccumulator: return "EmptyAccumulator";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::MissingEigenspace: return "MissingEigenspace";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::UnsupportedTopology: return "UnsupportedTopology";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::CountMismatch: return "CountMismatch";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::DegenerateBaseline: return "DegenerateBaseline";
    case ErrorKind::TooFewLayers: return "TooFewLayers";
    case ErrorKind::TooFewPairs: return "TooFewPairs";
    case ErrorKind::NoQualifyingDelta: return "NoQualifyingDelta";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::DatasetNotFound: return "DatasetNotFound";
    case ErrorKind::BadBundle: return "BadBundle";
  }
  return "UnknownError";
}

/// All library failures are reported through this exception type; kind()
/// identifies the failure class for programmatic handling.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace satlens
