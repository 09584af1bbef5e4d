#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace polaron {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside a documented range (bad config value, invalid device parameter).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// 1 + cos(phi_dc) vanishes, so the bare hopping integral does too.
class DegenerateHopping : public Error {
 public:
  using Error::Error;
};

/// Basis dimension does not fit the index type.
class CapacityExceeded : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Assembled sector matrix failed the Hermiticity check.
class TruncationInconsistency : public Error {
 public:
  using Error::Error;
};

class DegenerateSpectrum : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, std::size_t iterations, double best_residual)
      : Error(what), iterations_(iterations), best_residual_(best_residual) {}
  std::size_t iterations() const noexcept { return iterations_; }
  double best_residual() const noexcept { return best_residual_; }

 private:
  std::size_t iterations_;
  double best_residual_;
};

class SweepExhausted : public Error {
 public:
  using Error::Error;
};

/// State norm drifted beyond the hard unitarity budget during propagation.
class UnitarityViolation : public Error {
 public:
  UnitarityViolation(const std::string& what, std::size_t step, double norm)
      : Error(what), step_(step), norm_(norm) {}
  std::size_t step() const noexcept { return step_; }
  double norm() const noexcept { return norm_; }

 private:
  std::size_t step_;
  double norm_;
};

class TraceViolation : public Error {
 public:
  using Error::Error;
};

class NonPhysicalSpectrum : public Error {
 public:
  using Error::Error;
};

class SizeGuard : public Error {
 public:
  using Error::Error;
};

}  // namespace polaron
