#ifndef EVOHOM_TIMECORE_HPP
#define EVOHOM_TIMECORE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "error.hpp"

namespace evohom {

/// Partition 0 = t_0 < t_1 < ... < t_M = T. Slab m (1-based) is (t_{m-1}, t_m].
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> points) : t_(std::move(points)) {
    detail::require(t_.size() >= 2, "TimeGrid: need at least one slab");
    detail::require(t_.front() == 0.0, "TimeGrid: first point must be 0");
    for (std::size_t i = 1; i < t_.size(); ++i)
      detail::require(t_[i] > t_[i - 1], "TimeGrid: points must be strictly increasing");
  }

  static TimeGrid uniform(double T, int M) {
    detail::require(T > 0.0, "TimeGrid: final time must be positive");
    detail::require(M >= 1, "TimeGrid: slab count must be at least 1");
    std::vector<double> t(M + 1);
    for (int i = 0; i <= M; ++i) t[i] = T * i / M;
    t[M] = T;
    return TimeGrid(std::move(t));
  }

  int slabs() const { return static_cast<int>(t_.size()) - 1; }
  double final_time() const { return t_.back(); }
  double point(int i) const { return t_.at(i); }
  const std::vector<double>& points() const { return t_; }
  double start(int m) const { return t_.at(m - 1); }
  double end(int m) const { return t_.at(m); }
  double length(int m) const { return t_.at(m) - t_.at(m - 1); }

  /// True when all slab lengths agree to rounding.
  bool is_uniform() const {
    const double h = length(1);
    for (int m = 2; m <= slabs(); ++m)
      if (std::abs(length(m) - h) > 1e-12 * h) return false;
    return true;
  }

  /// Slab index m with t in (t_{m-1}, t_m]; t must lie in (0, T].
  int locate(double t) const {
    if (!(t > 0.0 && t <= t_.back()))
      throw ValidationError("TimeGrid: t = " + std::to_string(t) + " outside (0, T]");
    auto it = std::lower_bound(t_.begin() + 1, t_.end(), t);
    return static_cast<int>(it - t_.begin());
  }

 private:
  std::vector<double> t_;
};

namespace detail {

// Moments of s^k e^{-x s} on [0, 1] by the power series of the exponential;
// every term has the same sign pattern and decays fast for x <= 1.
inline double unit_moment_series(int k, double x) {
  double term = 1.0, sum = 0.0;
  for (int j = 0; j < 200; ++j) {
    const double add = term / (k + 1 + j);
    sum += add;
    if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    term *= -x / (j + 1);
  }
  return sum;
}

}  // namespace detail

/// Moments mu_k = int_0^h t^k e^{-2 rho t} dt for k = 0..k_max.
inline std::vector<double> weighted_moments(double h, double rho, int k_max) {
  if (!(h > 0.0)) throw ValidationError("weighted_moments: slab length must be positive");
  detail::require(rho >= 0.0, "weighted_moments: rho must be nonnegative");
  detail::require(k_max >= 0, "weighted_moments: k_max must be nonnegative");
  std::vector<double> mu(k_max + 1);
  const double x = 2.0 * rho * h;
  for (int k = 0; k <= k_max; ++k) {
    const double scale = std::pow(h, k + 1);
    if (rho == 0.0) {
      mu[k] = scale / (k + 1);
    } else if (x <= 1.0) {
      mu[k] = scale * detail::unit_moment_series(k, x);
    } else {
      // int_0^1 s^k e^{-xs} ds = k! P(k+1, x) / x^{k+1}
      mu[k] = scale * boost::math::tgamma(k + 1.0) * boost::math::gamma_p(k + 1.0, x) /
              std::pow(x, k + 1);
    }
  }
  return mu;
}

/// Two-point right-sided Gauss-Radau rule for the weight e^{-2 rho (t - t0)} on (t0, t1].
struct WeightedRadauRule {
  double t0 = 0.0;
  double t1 = 1.0;
  double rho = 0.0;
  std::array<double, 2> nodes{};    // nodes[1] == t1
  std::array<double, 2> weights{};

  template <class F>
  double apply(F&& f) const {
    return weights[0] * f(nodes[0]) + weights[1] * f(nodes[1]);
  }
};

inline WeightedRadauRule build_radau_rule(double t0, double t1, double rho) {
  const double h = t1 - t0;
  if (!(h > 0.0)) throw ValidationError("build_radau_rule: slab length must be positive");
  detail::require(rho >= 0.0, "build_radau_rule: rho must be nonnegative");
  // Moments of the unit slab with rate rho*h; rescaled at the end.
  const std::vector<double> nu = weighted_moments(1.0, rho * h, 2);
  const double d0 = nu[0] - nu[1];  // int (1 - s) weight
  const double d1 = nu[1] - nu[2];  // int s (1 - s) weight
  if (!(d0 > 0.0) || !std::isfinite(d1))
    throw SolverError("build_radau_rule: degenerate moment system");
  const double tau = d1 / d0;
  const double w0 = d0 / (1.0 - tau);
  const double w1 = nu[0] - w0;
  WeightedRadauRule rule;
  rule.t0 = t0;
  rule.t1 = t1;
  rule.rho = rho;
  rule.nodes = {t0 + h * tau, t1};
  rule.weights = {h * w0, h * w1};
  return rule;
}

/// Shifted Legendre basis of degree <= 1 on a slab: phi_0 = 1, phi_1 = 2 s - 1, s in [0, 1].
inline double temporal_basis(int i, double s) { return i == 0 ? 1.0 : 2.0 * s - 1.0; }

/// d/dt of the temporal basis on a slab of length h.
inline double temporal_basis_dt(int i, double h) { return i == 0 ? 0.0 : 2.0 / h; }

/// The 2x2 temporal matrices of one slab, indexed [test][trial].
struct SlabTemporalMatrices {
  std::array<std::array<double, 2>, 2> mass{};    // sum_q w_q phi_j phi_i
  std::array<std::array<double, 2>, 2> deriv{};   // sum_q w_q phi_j' phi_i
  std::array<std::array<double, 2>, 2> jump{};    // phi_j(t0+) phi_i(t0+)
  std::array<double, 2> left_value{};             // phi_i(t0+)
};

inline SlabTemporalMatrices slab_temporal_matrices(const WeightedRadauRule& rule) {
  SlabTemporalMatrices s;
  const double h = rule.t1 - rule.t0;
  for (int i = 0; i < 2; ++i) {
    s.left_value[i] = temporal_basis(i, 0.0);
    for (int j = 0; j < 2; ++j) {
      for (int q = 0; q < 2; ++q) {
        const double sq = (rule.nodes[q] - rule.t0) / h;
        s.mass[i][j] += rule.weights[q] * temporal_basis(j, sq) * temporal_basis(i, sq);
        s.deriv[i][j] += rule.weights[q] * temporal_basis_dt(j, h) * temporal_basis(i, sq);
      }
      s.jump[i][j] = temporal_basis(j, 0.0) * temporal_basis(i, 0.0);
    }
  }
  return s;
}

}  // namespace evohom

#endif  // EVOHOM_TIMECORE_HPP
