#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dipolestack {

using Complex = std::complex<double>;

inline constexpr const char* kVersion = "0.1.0";

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegree = kPi / 180.0;

/// Vacuum wavenumber in rad/nm.
inline double vacuum_wavenumber(double wavelength_nm) { return 2.0 * kPi / wavelength_nm; }

// Error hierarchy. Every error the library raises derives from Error so that
// front ends can map categories to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: malformed geometry, out-of-range arguments, bad files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class OutOfRangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Numerical procedure did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class FitError : public ConvergenceError {
 public:
  FitError(const std::string& what, double residual_norm)
      : ConvergenceError(what), residual_norm_(residual_norm) {}
  double residual_norm() const { return residual_norm_; }

 private:
  double residual_norm_;
};

/// A data set admits several comparably good solutions.
class AmbiguityError : public Error {
 public:
  using Error::Error;
};

enum class Polarization { S, P };

inline const char* to_string(Polarization p) { return p == Polarization::S ? "S" : "P"; }

}  // namespace dipolestack
