#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace svarproj {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr std::string_view kVersion = "1.0.0";

enum class ErrorCode {
  DimensionMismatch,
  SingularDesign,
  ShortSample,
  UnitRoot,
  SingularSigma,
  EmptyIdentifiedSet,
  NormalizationMissing,
  InvalidRestriction,
  NoFeasibleStart,
  SingularUpdate,
  DegenerateWishart,
  DomainError,
  NoValidDraws,
  BracketFailure,
  InputError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::ShortSample: return "ShortSample";
    case ErrorCode::UnitRoot: return "UnitRoot";
    case ErrorCode::SingularSigma: return "SingularSigma";
    case ErrorCode::EmptyIdentifiedSet: return "EmptyIdentifiedSet";
    case ErrorCode::NormalizationMissing: return "NormalizationMissing";
    case ErrorCode::InvalidRestriction: return "InvalidRestriction";
    case ErrorCode::NoFeasibleStart: return "NoFeasibleStart";
    case ErrorCode::SingularUpdate: return "SingularUpdate";
    case ErrorCode::DegenerateWishart: return "DegenerateWishart";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NoValidDraws: return "NoValidDraws";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::InputError: return "InputError";
  }
  return "Unknown";
}

/// All library failures surface as this exception; `code()` tells them apart.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

// Literal messages skip building a std::string on the success path.
inline void require(bool condition, ErrorCode code, const char* what) {
  if (!condition) throw Error(code, what);
}

}  // namespace svarproj
