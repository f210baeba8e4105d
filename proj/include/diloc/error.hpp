#pragma once

#include <stdexcept>
#include <string>

namespace diloc {

/// 1-based node identifier. Anchors are 1..m+1, sensors m+2..N.
using NodeId = int;

enum class ErrorKind {
  Asymmetric,
  NegativeEntry,
  NonzeroDiagonal,
  DimensionMismatch,
  UnknownNode,
  NotRealizable,
  DegenerateSimplex,
  OutsideHull,
  DegenerateAnchors,
  Diverged,
  UnsupportedDimension,
  InvalidArgument,
  MissingTriangulation,
  SingularSystem,
  InvalidAlpha,
  PersistenceViolation,
  LowBiasViolation,
  ConfigInvalid,
  FieldLoadError,
  IoError,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace diloc
