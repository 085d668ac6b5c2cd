#ifndef EVOHOM_ANALYTIC_HPP
#define EVOHOM_ANALYTIC_HPP

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "error.hpp"

namespace evohom {

/// Scalar time signal f(t), t > 0; the unit step gets closed-form oracles.
struct TimeSignal {
  enum class Kind { unit_step, zero, function };
  Kind kind = Kind::unit_step;
  std::function<double(double)> f;

  static TimeSignal unit_step() { return {Kind::unit_step, [](double) { return 1.0; }}; }
  static TimeSignal zero() { return {Kind::zero, [](double) { return 0.0; }}; }
  static TimeSignal sine(double freq = 1.0) {
    return {Kind::function, [freq](double t) { return std::sin(2.0 * std::numbers::pi * freq * t); }};
  }
  static TimeSignal function(std::function<double(double)> g) { return {Kind::function, std::move(g)}; }

  double operator()(double t) const { return f(t); }
};

namespace detail {

template <class F>
double adaptive_integral(F&& f, double a, double b, double tol = 1e-12) {
  if (b <= a) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, tol, &err);
}

}  // namespace detail

/// Solution of u' + sin(2 pi n x) u = f, u(0) = 0, at (t, x).
inline double ode_exact(int n, double t, double x, const TimeSignal& source = TimeSignal::unit_step()) {
  if (t < 0.0) throw ValidationError("ode_exact: t must be nonnegative");
  const double s = std::sin(2.0 * std::numbers::pi * n * x);
  switch (source.kind) {
    case TimeSignal::Kind::zero: return 0.0;
    case TimeSignal::Kind::unit_step:
      if (s == 0.0) return t;
      return -std::expm1(-t * s) / s;
    case TimeSignal::Kind::function:
      return detail::adaptive_integral(
          [&](double r) { return std::exp(-(t - r) * s) * source(r); }, 0.0, t, 1e-12);
  }
  return 0.0;
}

/// Modified Bessel function I_0 by its power series, 0 <= x <= 50.
inline double bessel_i0(double x) {
  if (x < 0.0) throw ValidationError("bessel_i0: x must be nonnegative");
  if (x > 50.0) throw ValidationError("bessel_i0: x must not exceed 50");
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int m = 1; m < 500; ++m) {
    term *= q / (static_cast<double>(m) * m);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

/// int_0^t I_0(s) ds by the termwise-integrated series.
inline double bessel_i0_integral(double t) {
  if (t < 0.0) throw ValidationError("bessel_i0_integral: t must be nonnegative");
  if (t > 50.0) throw ValidationError("bessel_i0_integral: t must not exceed 50");
  const double q = 0.25 * t * t;
  double coef = t;  // t^{2m+1} / ((m!)^2 4^m)
  double sum = t;
  for (int m = 1; m < 500; ++m) {
    coef *= q / (static_cast<double>(m) * m);
    const double add = coef / (2.0 * m + 1.0);
    sum += add;
    if (add < 1e-17 * sum) break;
  }
  return sum;
}

/// Homogenised ODE solution int_0^t I_0(t - s) f(s) ds.
inline double ode_hom_exact(double t, const TimeSignal& source = TimeSignal::unit_step()) {
  if (t < 0.0) throw ValidationError("ode_hom_exact: t must be nonnegative");
  switch (source.kind) {
    case TimeSignal::Kind::zero: return 0.0;
    case TimeSignal::Kind::unit_step: return bessel_i0_integral(t);
    case TimeSignal::Kind::function:
      return detail::adaptive_integral([&](double r) { return bessel_i0(t - r) * source(r); }, 0.0, t,
                                       1e-12);
  }
  return 0.0;
}

/// Result of the double-series law with its certified truncation data.
struct SeriesValue {
  std::complex<double> value;
  double tail_bound = 0.0;
  int m_max = 0;  // inner terms
  int j_max = 0;  // outer terms
};

/// M(z) = 1 + sum_{j>=1} (-S)^j with S = sum_{m>=1} (2m)!/(2^m m!)^2 z^{-2m}.
inline SeriesValue series_material_law(std::complex<double> z, double tol = 1e-13) {
  detail::require(tol > 0.0, "series_material_law: tol must be positive");
  const std::complex<double> w = 1.0 / (z * z);
  const double aw = std::abs(w);
  if (!(aw < 1.0))
    throw SolverError("series_material_law: |z^-2| >= 1, outside the convergence region");
  // A first pass bounds |S| so the inner tolerance can absorb the outer sensitivity.
  auto inner = [&](double inner_tol, int& terms, double& bound) {
    std::complex<double> s = 0.0, wp = 1.0;
    double c = 1.0;
    for (int m = 1; m < 100000; ++m) {
      c *= (2.0 * m - 1.0) / (2.0 * m);
      wp *= w;
      s += c * wp;
      // Coefficients decrease, so the remainder is below c_{m+1}|w|^{m+1}/(1-|w|).
      const double c_next = c * (2.0 * m + 1.0) / (2.0 * m + 2.0);
      bound = c_next * std::abs(wp) * aw / (1.0 - aw);
      terms = m;
      if (bound <= inner_tol) break;
    }
    return s;
  };
  int m_max = 0;
  double inner_bound = 0.0;
  std::complex<double> S = inner(1e-3, m_max, inner_bound);
  const double smag = std::abs(S) + inner_bound;
  if (!(smag < 1.0))
    throw SolverError("series_material_law: inner sum magnitude reaches 1, outer series diverges");
  const double gap = 1.0 - smag;
  S = inner(0.25 * tol * gap * gap, m_max, inner_bound);
  const double sa = std::abs(S);
  std::complex<double> m = 1.0, p = 1.0;
  int j = 0;
  double outer_bound = 1.0;
  for (j = 1; j < 100000; ++j) {
    p *= -S;
    m += p;
    outer_bound = std::pow(sa, j + 1) / (1.0 - sa);
    if (outer_bound <= 0.5 * tol) break;
  }
  SeriesValue r;
  r.value = m;
  // d/dS (1/(1+S)) is bounded by 1/gap^2 on the disc containing the exact S.
  r.tail_bound = outer_bound + inner_bound / (gap * gap);
  r.m_max = m_max;
  r.j_max = j;
  return r;
}

/// Closed form (1 - z^{-2})^{1/2}, principal branch.
inline std::complex<double> series_material_law_closed(std::complex<double> z) {
  return std::sqrt(1.0 - 1.0 / (z * z));
}

}  // namespace evohom

#endif  // EVOHOM_ANALYTIC_HPP
