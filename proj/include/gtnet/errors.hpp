#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gtnet {

// Every error raised by the library derives from Error so callers (the CLI in
// particular) can map families of failures onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the domain of a property function (negative Mach, T out of
// the polynomial range, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Requested mass flow exceeds the choked flow of a station.
class InfeasibleFlowError : public Error {
 public:
  using Error::Error;
};

// Query outside the speed/beta/pressure-ratio hull of a component map.
class MapExtrapolationError : public Error {
 public:
  using Error::Error;
};

class InvalidDegradationError : public Error {
 public:
  using Error::Error;
};

// Design targets that cannot be sized (named relation in the message).
class SizingError : public Error {
 public:
  using Error::Error;
};

// Missing area, bad bleed fractions, inconsistent dimensions and similar.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_residuals)
      : Error(what), residuals_(std::move(last_residuals)) {}
  explicit ConvergenceError(const std::string& what) : Error(what) {}

  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

// Sampling envelope rejected too many draws.
class EnvelopeError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced by a component net.
class CascadeError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// File parsing / schema / version mismatches.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace gtnet
