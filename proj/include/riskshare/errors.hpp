#ifndef RISKSHARE_ERRORS_HPP
#define RISKSHARE_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace riskshare {

/// Invalid input: bad parameters, malformed specs, violated preconditions.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Vectors or matrices whose shapes do not agree.
class DimensionMismatch : public ValidationError {
public:
  DimensionMismatch(const std::string& what, std::size_t expected, std::size_t got)
      : ValidationError(what + ": expected dimension " + std::to_string(expected) +
                        ", got " + std::to_string(got)) {}
};

/// The value function is -infinity: no density has finite aggregate penalty.
class IllPosedError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver stopped before certifying its tolerance. Carries the
/// best iterate found and the residual at that point.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, std::vector<double> best_point,
                   double best_score, double residual)
      : std::runtime_error(what),
        best_point_(std::move(best_point)),
        best_score_(best_score),
        residual_(residual) {}

  const std::vector<double>& best_point() const noexcept { return best_point_; }
  double best_score() const noexcept { return best_score_; }
  double residual() const noexcept { return residual_; }

private:
  std::vector<double> best_point_;
  double best_score_;
  double residual_;
};

/// Operation is not defined for the given family (e.g. primal recovery for a
/// general market).
class UnsupportedError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace riskshare

#endif  // RISKSHARE_ERRORS_HPP
