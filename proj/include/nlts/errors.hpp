#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace nlts {

/// Configuration / precondition violations (maps to CLI exit code 4).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A zero of b / b_N sits inside (or too close to) the protected region,
/// so the discrete system is not safely invertible (CLI exit code 2).
class SeparationError : public std::runtime_error {
public:
  SeparationError(const std::string& what, std::complex<double> zero)
      : std::runtime_error(what), offending_zero(zero) {}
  std::complex<double> offending_zero;
};

/// Resolvent argument inside or too close to the declared spectral envelope.
class SpectralProximityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Linear solve failed (singular pivot etc.); carries a diagnostic string.
class NumericsError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Zero search could not certify its result (winding mismatch, boundary zero).
class ZeroFindError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Fixed-point iteration error grew repeatedly; contraction premise violated.
class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace nlts
