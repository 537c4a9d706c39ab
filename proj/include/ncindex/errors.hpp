#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace ncindex {

/// Short scientific rendering of a residual for error messages.
inline std::string sci_string(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// Operands belong to different algebras, or shapes do not compose.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation does not hold (non-normal input,
/// non-projection, map not reduced by its projection, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of the operation (group element not in the
/// group, unsupported operator kind, ...).
class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// The spectrum near zero is not separated from the rest at the requested
/// tolerance. Carries the measured gap ratio so callers can report it.
class SpectralGapError : public std::runtime_error {
 public:
  SpectralGapError(const std::string& what, double measured_gap)
      : std::runtime_error(what + " (measured gap ratio " + std::to_string(measured_gap) + ")"),
        gap_(measured_gap) {}
  double measured_gap() const noexcept { return gap_; }

 private:
  double gap_;
};

/// Retraction of a near-projection is undefined because its spectrum enters
/// the forbidden band around 1/2.
class RetractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario configuration could not be parsed or validated.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ncindex
