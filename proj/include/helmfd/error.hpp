#pragma once

#include <stdexcept>
#include <string>

namespace helmfd {

enum class ErrorCode {
  Config,
  NonFinite,
  InvalidParameter,
  UnsupportedKind,
  MeshInconsistent,
  Geometry,
  Refinement,
  DegenerateTangent,
  InsufficientStencil,
  MissingStencil,
  NoNontrivialSolution,
  RankDeficient,
  Inconsistent,
  SingularGram,
  BoundaryStencil,
  SingularSystem,
  ReferenceMismatch,
  AccuracyLoss,
  Io,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::Config: return "config";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::InvalidParameter: return "invalid_parameter";
    case ErrorCode::UnsupportedKind: return "unsupported_kind";
    case ErrorCode::MeshInconsistent: return "mesh_inconsistent";
    case ErrorCode::Geometry: return "geometry";
    case ErrorCode::Refinement: return "refinement";
    case ErrorCode::DegenerateTangent: return "degenerate_tangent";
    case ErrorCode::InsufficientStencil: return "insufficient_stencil";
    case ErrorCode::MissingStencil: return "missing_stencil";
    case ErrorCode::NoNontrivialSolution: return "no_nontrivial_solution";
    case ErrorCode::RankDeficient: return "rank_deficient";
    case ErrorCode::Inconsistent: return "inconsistent";
    case ErrorCode::SingularGram: return "singular_gram";
    case ErrorCode::BoundaryStencil: return "boundary_stencil_failure";
    case ErrorCode::SingularSystem: return "singular_system";
    case ErrorCode::ReferenceMismatch: return "reference_mismatch";
    case ErrorCode::AccuracyLoss: return "accuracy_loss";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

  // Configuration problems map to exit code 2, everything else to 3.
  bool is_config() const noexcept {
    return code_ == ErrorCode::Config || code_ == ErrorCode::InvalidParameter ||
           code_ == ErrorCode::UnsupportedKind || code_ == ErrorCode::Io || code_ == ErrorCode::Geometry ||
           code_ == ErrorCode::Refinement;
  }

 private:
  ErrorCode code_;
};

}  // namespace helmfd
