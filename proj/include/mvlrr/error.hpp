#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvlrr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent dataset input (files, shapes, values).
class DatasetError : public Error {
 public:
  using Error::Error;
};

/// Matrix shapes that do not agree for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A view whose points are all identical, so no kernel bandwidth exists.
class DegenerateViewError : public Error {
 public:
  using Error::Error;
};

/// An iterative eigen/singular value estimate that hit its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_estimate)
      : Error(what), best_estimate_(best_estimate) {}
  double best_estimate() const noexcept { return best_estimate_; }

 private:
  double best_estimate_;
};

/// Non-finite values appeared in the solver state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration)
      : Error(what), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace mvlrr
