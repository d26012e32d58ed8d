#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace maflow {

/// Positivity of a Hermitian metric field was lost (or a pointwise
/// determinant vanished). Carries the first offending grid point.
class DegenerateMetric : public std::runtime_error {
 public:
  DegenerateMetric(const std::string& what, std::size_t point, double value)
      : std::runtime_error(what), point_(point), value_(value) {}

  std::size_t point() const noexcept { return point_; }
  /// The offending minimum eigenvalue or determinant.
  double value() const noexcept { return value_; }

 private:
  std::size_t point_;
  double value_;
};

class DomainMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Newton iteration ran out of iterations. Holds the sup-norm residual of
/// every iterate, starting with the initial guess.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}

  const std::vector<double>& residual_history() const noexcept {
    return history_;
  }

 private:
  std::vector<double> history_;
};

}  // namespace maflow
