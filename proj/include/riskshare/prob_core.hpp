#ifndef RISKSHARE_PROB_CORE_HPP
#define RISKSHARE_PROB_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "riskshare/errors.hpp"

namespace riskshare {

/// Tolerance on the total mass of a probability vector before renormalization.
inline constexpr double kProbSumTol = 1e-12;
/// Tolerance on E^P[q] = 1 for a density.
inline constexpr double kDensityTol = 1e-9;

/// Finite state space with strictly positive probabilities.
///
/// Construction rejects zero or negative weights and totals further than
/// 1e-12 from one; accepted weights are divided by their sum so that the
/// stored vector is normalized.
class ProbSpace {
public:
  explicit ProbSpace(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw ValidationError("ProbSpace: at least one state is required");
    double total = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      const double p = probs_[i];
      if (!std::isfinite(p) || p <= 0.0)
        throw ValidationError("ProbSpace: probability of state " + std::to_string(i) +
                              " must be finite and > 0");
      total += p;
    }
    if (std::abs(total - 1.0) > kProbSumTol)
      throw ValidationError("ProbSpace: probabilities sum to " + std::to_string(total) +
                            ", expected 1");
    for (double& p : probs_) p /= total;
  }
  ProbSpace(std::initializer_list<double> probs) : ProbSpace(std::vector<double>(probs)) {}

  static ProbSpace uniform(std::size_t n) {
    if (n == 0) throw ValidationError("ProbSpace: at least one state is required");
    return ProbSpace(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }

  friend bool operator==(const ProbSpace&, const ProbSpace&) = default;

private:
  std::vector<double> probs_;
};

/// A bounded random variable on a finite space: one finite value per state.
/// Positive values are losses.
class Rv {
public:
  Rv() = default;
  explicit Rv(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i]))
        throw ValidationError("Rv: entry " + std::to_string(i) + " is not finite");
  }
  Rv(std::initializer_list<double> values) : Rv(std::vector<double>(values)) {}
  explicit Rv(std::span<const double> values) : Rv(std::vector<double>(values.begin(), values.end())) {}

  static Rv constant(std::size_t n, double c) { return Rv(std::vector<double>(n, c)); }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& vec() const noexcept { return values_; }

  friend bool operator==(const Rv&, const Rv&) = default;

private:
  std::vector<double> values_;
};

inline void require_same_size(const char* what, std::size_t expected, std::size_t got) {
  if (expected != got) throw DimensionMismatch(what, expected, got);
}

inline Rv operator+(const Rv& a, const Rv& b) {
  require_same_size("Rv addition", a.size(), b.size());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return Rv(std::move(out));
}

inline Rv operator-(const Rv& a, const Rv& b) {
  require_same_size("Rv subtraction", a.size(), b.size());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return Rv(std::move(out));
}

inline Rv operator+(const Rv& a, double c) {
  std::vector<double> out(a.vec());
  for (double& v : out) v += c;
  return Rv(std::move(out));
}

inline Rv operator-(const Rv& a, double c) { return a + (-c); }

inline Rv operator*(double s, const Rv& a) {
  std::vector<double> out(a.vec());
  for (double& v : out) v *= s;
  return Rv(std::move(out));
}

inline Rv operator/(const Rv& a, double s) {
  std::vector<double> out(a.vec());
  for (double& v : out) v /= s;
  return Rv(std::move(out));
}

inline double sup_norm(const Rv& x) {
  double m = 0.0;
  for (double v : x.values()) m = std::max(m, std::abs(v));
  return m;
}

/// Radon-Nikodym derivative dQ/dP of an absolutely continuous probability:
/// nonnegative with E^P[q] = 1 (within 1e-9).
class Density {
public:
  Density(const ProbSpace& space, std::vector<double> q) : q_(std::move(q)) {
    require_same_size("Density", space.size(), q_.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < q_.size(); ++i) {
      if (!std::isfinite(q_[i]) || q_[i] < 0.0)
        throw ValidationError("Density: entry " + std::to_string(i) + " must be finite and >= 0");
      mass += space[i] * q_[i];
    }
    if (std::abs(mass - 1.0) > kDensityTol)
      throw ValidationError("Density: E^P[q] = " + std::to_string(mass) + ", expected 1");
  }

  /// The density of P itself.
  static Density ones(const ProbSpace& space) {
    return Density(space, std::vector<double>(space.size(), 1.0));
  }

  std::size_t size() const noexcept { return q_.size(); }
  double operator[](std::size_t i) const { return q_[i]; }
  std::span<const double> values() const noexcept { return q_; }
  const std::vector<double>& vec() const noexcept { return q_; }

  bool is_ones() const noexcept {
    return std::all_of(q_.begin(), q_.end(), [](double v) { return v == 1.0; });
  }

  friend bool operator==(const Density&, const Density&) = default;

private:
  std::vector<double> q_;
};

/// E^P[x].
inline double expect(const ProbSpace& space, const Rv& x) {
  require_same_size("expect", space.size(), x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += space[i] * x[i];
  return s;
}

/// E^Q[x] = sum_i p_i q_i x_i. Same accumulation order as expect(), so Q = P
/// reproduces it bit for bit.
inline double expect_under(const ProbSpace& space, const Density& q, const Rv& x) {
  require_same_size("expect_under (density)", space.size(), q.size());
  require_same_size("expect_under (rv)", space.size(), x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (space[i] * q[i]) * x[i];
  return s;
}

/// Essential supremum; every state carries positive mass, so this is the max.
inline double essup(const ProbSpace& space, const Rv& x) {
  require_same_size("essup", space.size(), x.size());
  return *std::max_element(x.vec().begin(), x.vec().end());
}

/// D_KL(Q || P) = E^P[q log q], with 0 log 0 = 0.
inline double kl_divergence(const ProbSpace& space, const Density& q) {
  require_same_size("kl_divergence", space.size(), q.size());
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0.0) s += space[i] * q[i] * std::log(q[i]);
  return std::max(s, 0.0);
}

}  // namespace riskshare

#endif  // RISKSHARE_PROB_CORE_HPP
