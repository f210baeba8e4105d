#include "diloc/error.hpp"

namespace diloc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Asymmetric: return "Asymmetric";
    case ErrorKind::NegativeEntry: return "NegativeEntry";
    case ErrorKind::NonzeroDiagonal: return "NonzeroDiagonal";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::NotRealizable: return "NotRealizable";
    case ErrorKind::DegenerateSimplex: return "DegenerateSimplex";
    case ErrorKind::OutsideHull: return "OutsideHull";
    case ErrorKind::DegenerateAnchors: return "DegenerateAnchors";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::UnsupportedDimension: return "UnsupportedDimension";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MissingTriangulation: return "MissingTriangulation";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::InvalidAlpha: return "InvalidAlpha";
    case ErrorKind::PersistenceViolation: return "PersistenceViolation";
    case ErrorKind::LowBiasViolation: return "LowBiasViolation";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::FieldLoadError: return "FieldLoadError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace diloc
