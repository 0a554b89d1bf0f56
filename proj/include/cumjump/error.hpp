#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cumjump {

enum class Errc {
  InvalidArgument,
  InvalidMixture,
  InvalidModel,
  InvalidGrid,
  TiltOutOfDomain,
  MomentDiverges,
  DimensionMismatch,
  InvalidAlpha,
  EigenFailure,
  RuleMismatch,
  NonMonotoneGrid,
  TooFewPoints,
  SingularMatrix,
  GridMismatch,
  SupportNotCovered,
  DominatedRateViolated,
  BadWindow,
  DegenerateData,
  NonPositiveSample,
  GapNonPositive,
  BracketInvalid,
  ObjectiveNotFinite,
};

constexpr std::string_view to_string(Errc c) noexcept {
  switch (c) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidMixture: return "InvalidMixture";
    case Errc::InvalidModel: return "InvalidModel";
    case Errc::InvalidGrid: return "InvalidGrid";
    case Errc::TiltOutOfDomain: return "TiltOutOfDomain";
    case Errc::MomentDiverges: return "MomentDiverges";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidAlpha: return "InvalidAlpha";
    case Errc::EigenFailure: return "EigenFailure";
    case Errc::RuleMismatch: return "RuleMismatch";
    case Errc::NonMonotoneGrid: return "NonMonotoneGrid";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::SingularMatrix: return "SingularMatrix";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::SupportNotCovered: return "SupportNotCovered";
    case Errc::DominatedRateViolated: return "DominatedRateViolated";
    case Errc::BadWindow: return "BadWindow";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::NonPositiveSample: return "NonPositiveSample";
    case Errc::GapNonPositive: return "GapNonPositive";
    case Errc::BracketInvalid: return "BracketInvalid";
    case Errc::ObjectiveNotFinite: return "ObjectiveNotFinite";
  }
  return "Unknown";
}

/// Library error. Every precondition violation raised by cumjump carries one
/// of the codes above so callers (and the CLI exit-code mapping) can branch
/// on the category instead of parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace cumjump
