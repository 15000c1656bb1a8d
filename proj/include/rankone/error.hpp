#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace rankone {

enum class Errc {
  DimensionMismatch,
  InvalidArgument,
  Asymmetric,
  NotOrthonormal,
  NotDescending,
  DegenerateResidual,
  MissingTrace,
  MissingS,
  MissingMatrix,
  PoleEvaluation,
  PoleCollision,
  NoSignChange,
  MaxIterations,
  RankDeficient,
  AllDeflated,
  IsolatedVertexWithoutSelfLoop,
  ZeroDegree,
  ZeroMatrix,
  NonConvergence,
  Parse,
  Io,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Asymmetric: return "Asymmetric";
    case Errc::NotOrthonormal: return "NotOrthonormal";
    case Errc::NotDescending: return "NotDescending";
    case Errc::DegenerateResidual: return "DegenerateResidual";
    case Errc::MissingTrace: return "MissingTrace";
    case Errc::MissingS: return "MissingS";
    case Errc::MissingMatrix: return "MissingMatrix";
    case Errc::PoleEvaluation: return "PoleEvaluation";
    case Errc::PoleCollision: return "PoleCollision";
    case Errc::NoSignChange: return "NoSignChange";
    case Errc::MaxIterations: return "MaxIterations";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::AllDeflated: return "AllDeflated";
    case Errc::IsolatedVertexWithoutSelfLoop: return "IsolatedVertexWithoutSelfLoop";
    case Errc::ZeroDegree: return "ZeroDegree";
    case Errc::ZeroMatrix: return "ZeroMatrix";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::Parse: return "Parse";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code. `index` optionally names the
/// offending item (bracket number, row, input line).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), index_(index) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  Errc code_;
  std::optional<std::size_t> index_;
};

}  // namespace rankone
