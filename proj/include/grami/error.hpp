#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace grami {

enum class ErrorKind {
  MissingFile,
  IndexOutOfRange,
  DuplicateEdge,
  NonFiniteFeature,
  SchemaMismatch,
  NoAttributedType,
  RelationTooSmall,
  NegativeSamplingExhausted,
  ShapeMismatch,
  EmptySupport,
  NotAttributedType,
  MissingType,
  NonFiniteLoss,
  IoError,
  CorruptCheckpoint,
  SingleClass,
  TooFewSamples,
  EmptyTestSet,
  Config,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::DuplicateEdge: return "DuplicateEdge";
    case ErrorKind::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::NoAttributedType: return "NoAttributedType";
    case ErrorKind::RelationTooSmall: return "RelationTooSmall";
    case ErrorKind::NegativeSamplingExhausted: return "NegativeSamplingExhausted";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptySupport: return "EmptySupport";
    case ErrorKind::NotAttributedType: return "NotAttributedType";
    case ErrorKind::MissingType: return "MissingType";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::EmptyTestSet: return "EmptyTestSet";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

// Every failure the library reports carries a kind so callers (the CLI in
// particular) can triage without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

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

}  // namespace grami
