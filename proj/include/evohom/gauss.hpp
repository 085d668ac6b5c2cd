#ifndef EVOHOM_GAUSS_HPP
#define EVOHOM_GAUSS_HPP

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "error.hpp"

namespace evohom {

/// Quadrature rule on the reference interval [0, 1].
struct LineRule {
  std::vector<double> x;
  std::vector<double> w;
  int size() const { return static_cast<int>(x.size()); }
};

namespace detail {

inline LineRule compute_gauss_legendre(int n) {
  LineRule rule;
  rule.x.resize(n);
  rule.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration on P_n starting from the Chebyshev-like guess.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // Map from [-1, 1] to [0, 1]; the nodes come out in decreasing order.
    rule.x[i] = 0.5 * (1.0 - z);
    rule.x[n - 1 - i] = 0.5 * (1.0 + z);
    rule.w[i] = 0.5 * w;
    rule.w[n - 1 - i] = 0.5 * w;
  }
  if (n % 2 == 1) rule.x[n / 2] = 0.5;
  return rule;
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [0, 1], exact for polynomials of degree 2n-1.
inline const LineRule& gauss_legendre(int n) {
  detail::require(n >= 1 && n <= 200, "gauss_legendre: point count must lie in [1, 200]");
  static std::mutex mutex;
  static std::map<int, LineRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
  return it->second;
}

/// Integrate f over [a, b] with the n-point Gauss rule.
template <class F>
double integrate_gauss(F&& f, double a, double b, int n) {
  const LineRule& r = gauss_legendre(n);
  double s = 0.0;
  for (int q = 0; q < r.size(); ++q) s += r.w[q] * f(a + (b - a) * r.x[q]);
  return s * (b - a);
}

}  // namespace evohom

#endif  // EVOHOM_GAUSS_HPP
