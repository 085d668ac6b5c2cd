#ifndef EVOHOM_HOMOGENISATION_HPP
#define EVOHOM_HOMOGENISATION_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "coefficient.hpp"
#include "error.hpp"
#include "material_law.hpp"

namespace evohom {

namespace detail {

// Mean over [0, L] of a function that is smooth between the given sorted breakpoints.
inline double piecewise_mean(const std::function<double(double)>& f, double L,
                             const std::vector<double>& breaks) {
  std::vector<double> cuts{0.0};
  for (double b : breaks)
    if (b > 0.0 && b < L) cuts.push_back(b);
  cuts.push_back(L);
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    double err = 0.0;
    sum += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[k], cuts[k + 1], 12,
                                                                         1e-14, &err);
  }
  return sum / L;
}

}  // namespace detail

/// Integral mean (1/L) int_0^L c of a coefficient with period L in x.
inline double integral_mean(const CoefficientField& coeff, double period = 1.0) {
  detail::require(period > 0.0, "integral_mean: period must be positive");
  if (!coeff.has_period(period))
    throw ValidationError("integral_mean: coefficient " + coeff.to_string() +
                          " is not periodic with period " + std::to_string(period));
  return detail::piecewise_mean([&](double x) { return coeff(x); }, period,
                                coeff.breakpoints(0, 0.0, period));
}

/// d x d matrix of coefficients depending on the first coordinate only.
class StratifiedTensor {
 public:
  using Eval = std::function<Eigen::MatrixXd(double)>;

  StratifiedTensor(int d, Eval f, double period, std::vector<double> breaks)
      : d_(d), f_(std::move(f)), period_(period), breaks_(std::move(breaks)) {
    detail::require(d >= 1, "StratifiedTensor: dimension must be at least 1");
    detail::require(period > 0.0, "StratifiedTensor: period must be positive");
    std::sort(breaks_.begin(), breaks_.end());
  }

  /// From a matrix of fields; every entry must have the period and ignore y, z.
  static StratifiedTensor from_fields(const std::vector<std::vector<CoefficientField>>& a, double period) {
    const int d = static_cast<int>(a.size());
    std::vector<double> breaks;
    for (const auto& row : a) {
      detail::require(static_cast<int>(row.size()) == d, "StratifiedTensor: matrix must be square");
      for (const CoefficientField& c : row) {
        if (!c.has_period(period))
          throw ValidationError("StratifiedTensor: entry " + c.to_string() +
                                " is not a function of x with period " + std::to_string(period));
        const auto b = c.breakpoints(0, 0.0, period);
        breaks.insert(breaks.end(), b.begin(), b.end());
      }
    }
    return StratifiedTensor(
        d,
        [a, d](double x) {
          Eigen::MatrixXd m(d, d);
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = a[i][j](x);
          return m;
        },
        period, std::move(breaks));
  }

  int dim() const { return d_; }
  double period() const { return period_; }
  const std::vector<double>& breaks() const { return breaks_; }
  Eigen::MatrixXd operator()(double x) const { return f_(x); }

  double mean(const std::function<double(const Eigen::MatrixXd&)>& g) const {
    return detail::piecewise_mean([&](double x) { return g(f_(x)); }, period_, breaks_);
  }

  /// Pointwise inverse.
  StratifiedTensor inverse() const {
    Eval f = f_;
    return StratifiedTensor(
        d_,
        [f](double x) {
          const Eigen::MatrixXd m = f(x);
          Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
          if (!lu.isInvertible())
            throw ValidationError("dual_stratified_limit: coefficient is singular at x = " +
                                  std::to_string(x));
          return Eigen::MatrixXd(lu.inverse());
        },
        period_, breaks_);
  }

 private:
  int d_;
  Eval f_;
  double period_;
  std::vector<double> breaks_;
};

/// Effective matrix plus the mean formula that produced each entry.
struct EffectiveTensor {
  Eigen::MatrixXd value;
  std::vector<std::vector<std::string>> provenance;
};

/// Effective tensor of a stratified medium (oscillation along the first coordinate):
///   a11 = 1 / m(1/b11)
///   a1j = a11 m(b1j / b11),  ai1 = a11 m(bi1 / b11)
///   aij = a11 m(bi1 / b11) m(b1j / b11) + m(bij - bi1 b1j / b11)
inline EffectiveTensor homogenise_stratified(const StratifiedTensor& a) {
  const int d = a.dim();
  // a11 must stay uniformly positive; check on a dense sample and between breakpoints.
  double minv = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 2048; ++k) minv = std::min(minv, a((k + 0.5) * a.period() / 2048)(0, 0));
  if (!(minv > 0.0))
    throw ValidationError("homogenise_stratified: leading entry is not uniformly positive (min sample " +
                          std::to_string(minv) + ")");
  EffectiveTensor r;
  r.value.resize(d, d);
  r.provenance.assign(d, std::vector<std::string>(d));
  const double a11 = 1.0 / a.mean([](const Eigen::MatrixXd& b) { return 1.0 / b(0, 0); });
  r.value(0, 0) = a11;
  r.provenance[0][0] = "1/m(1/a11)";
  std::vector<double> row(d, 0.0), col(d, 0.0);  // m(b1j/b11), m(bi1/b11)
  for (int j = 1; j < d; ++j) {
    row[j] = a.mean([j](const Eigen::MatrixXd& b) { return b(0, j) / b(0, 0); });
    col[j] = a.mean([j](const Eigen::MatrixXd& b) { return b(j, 0) / b(0, 0); });
    r.value(0, j) = a11 * row[j];
    r.value(j, 0) = a11 * col[j];
    r.provenance[0][j] = "a11*m(a1j/a11)";
    r.provenance[j][0] = "a11*m(ai1/a11)";
  }
  for (int i = 1; i < d; ++i)
    for (int j = 1; j < d; ++j) {
      const double corr = a.mean([i, j](const Eigen::MatrixXd& b) {
        return b(i, j) - b(i, 0) * b(0, j) / b(0, 0);
      });
      r.value(i, j) = a11 * col[i] * row[j] + corr;
      r.provenance[i][j] = "a11*m(ai1/a11)*m(a1j/a11)+m(aij-ai1*a1j/a11)";
    }
  return r;
}

inline EffectiveTensor homogenise_stratified(const std::vector<std::vector<CoefficientField>>& a,
                                             double period = 1.0) {
  return homogenise_stratified(StratifiedTensor::from_fields(a, period));
}

/// Invert pointwise, homogenise, invert back.
inline EffectiveTensor dual_stratified_limit(const StratifiedTensor& a) {
  const EffectiveTensor inv = homogenise_stratified(a.inverse());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(inv.value);
  if (!lu.isInvertible()) throw ValidationError("dual_stratified_limit: homogenised inverse is singular");
  EffectiveTensor r;
  r.value = lu.inverse();
  r.provenance.assign(a.dim(), std::vector<std::string>(a.dim(), "inverse of homogenised inverse"));
  return r;
}

inline EffectiveTensor dual_stratified_limit(const std::vector<std::vector<CoefficientField>>& a,
                                             double period = 1.0) {
  return dual_stratified_limit(StratifiedTensor::from_fields(a, period));
}

// ---------------------------------------------------------------------------
// Schur quantities with respect to a two-part index decomposition
// ---------------------------------------------------------------------------

/// Index sets of the two parts; together they must cover 0..n-1 exactly once.
struct Split {
  std::vector<int> part0;
  std::vector<int> part1;

  static Split leading(int n0, int n) {
    Split s;
    for (int i = 0; i < n; ++i) (i < n0 ? s.part0 : s.part1).push_back(i);
    return s;
  }
};

/// q00 = a00^{-1}, q10 = a10 a00^{-1}, q01 = a00^{-1} a01, qS = a11 - a10 a00^{-1} a01.
struct SchurQuad {
  Eigen::MatrixXd q00, q10, q01, qS;
};

namespace detail {

inline void check_split(const Split& s, int n) {
  std::vector<int> seen(n, 0);
  for (int i : s.part0) {
    require(i >= 0 && i < n, "split index out of range");
    ++seen[i];
  }
  for (int i : s.part1) {
    require(i >= 0 && i < n, "split index out of range");
    ++seen[i];
  }
  for (int c : seen) require(c == 1, "split must partition the index range");
}

inline Eigen::MatrixXd sub(const Eigen::MatrixXd& a, const std::vector<int>& r, const std::vector<int>& c) {
  Eigen::MatrixXd m(r.size(), c.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) m(i, j) = a(r[i], c[j]);
  return m;
}

inline Eigen::PartialPivLU<Eigen::MatrixXd> checked_lu(const Eigen::MatrixXd& m, const std::string& what) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  if (m.size() > 0 && !(lu.rcond() > 1e-14)) throw SolverError(what + " is singular");
  return lu;
}

}  // namespace detail

inline SchurQuad schur_blocks(const Eigen::MatrixXd& a, const Split& split) {
  detail::require(a.rows() == a.cols(), "schur_blocks: matrix must be square");
  detail::check_split(split, static_cast<int>(a.rows()));
  const Eigen::MatrixXd a00 = detail::sub(a, split.part0, split.part0);
  const Eigen::MatrixXd a01 = detail::sub(a, split.part0, split.part1);
  const Eigen::MatrixXd a10 = detail::sub(a, split.part1, split.part0);
  const Eigen::MatrixXd a11 = detail::sub(a, split.part1, split.part1);
  const auto lu = detail::checked_lu(a00, "schur_blocks: 00-block");
  SchurQuad q;
  q.q00 = lu.inverse();
  q.q01 = lu.solve(a01);
  q.q10 = a10 * q.q00;
  q.qS = a11 - a10 * q.q01;
  return q;
}

/// Rebuild the block operator from its Schur quantities.
inline Eigen::MatrixXd reconstruct(const SchurQuad& q, const Split& split) {
  const int n = static_cast<int>(split.part0.size() + split.part1.size());
  const Eigen::MatrixXd a00 = q.q00.inverse();
  const Eigen::MatrixXd a01 = a00 * q.q01;
  const Eigen::MatrixXd a10 = q.q10 * a00;
  const Eigen::MatrixXd a11 = q.qS + q.q10 * a00 * q.q01;
  Eigen::MatrixXd a(n, n);
  const auto& p0 = split.part0;
  const auto& p1 = split.part1;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    for (std::size_t j = 0; j < p0.size(); ++j) a(p0[i], p0[j]) = a00(i, j);
    for (std::size_t j = 0; j < p1.size(); ++j) a(p0[i], p1[j]) = a01(i, j);
  }
  for (std::size_t i = 0; i < p1.size(); ++i) {
    for (std::size_t j = 0; j < p0.size(); ++j) a(p1[i], p0[j]) = a10(i, j);
    for (std::size_t j = 0; j < p1.size(); ++j) a(p1[i], p1[j]) = a11(i, j);
  }
  return a;
}

/// Inverse from the block formula
///   ( a00^-1 + a00^-1 a01 s a10 a00^-1   -a00^-1 a01 s )
///   ( -s a10 a00^-1                       s            ),  s = (a11 - a10 a00^-1 a01)^-1.
inline Eigen::MatrixXd block_inverse(const Eigen::MatrixXd& a, const Split& split) {
  const SchurQuad q = schur_blocks(a, split);
  const auto lu = detail::checked_lu(q.qS, "block_inverse: Schur complement");
  const Eigen::MatrixXd s = lu.inverse();
  const Eigen::MatrixXd b00 = q.q00 + q.q01 * s * q.q10;
  const Eigen::MatrixXd b01 = -q.q01 * s;
  const Eigen::MatrixXd b10 = -s * q.q10;
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd inv(n, n);
  const auto& p0 = split.part0;
  const auto& p1 = split.part1;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    for (std::size_t j = 0; j < p0.size(); ++j) inv(p0[i], p0[j]) = b00(i, j);
    for (std::size_t j = 0; j < p1.size(); ++j) inv(p0[i], p1[j]) = b01(i, j);
  }
  for (std::size_t i = 0; i < p1.size(); ++i) {
    for (std::size_t j = 0; j < p0.size(); ++j) inv(p1[i], p0[j]) = b10(i, j);
    for (std::size_t j = 0; j < p1.size(); ++j) inv(p1[i], p1[j]) = s(i, j);
  }
  return inv;
}

/// max over probe pairs (u, v) and the four Schur quantities of |<P u, (Q_a - Q_b) P' v>|,
/// where P, P' restrict the full-length probes to the parts each quantity acts between.
inline double schur_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Split& split,
                             const std::vector<Eigen::VectorXd>& probes) {
  const SchurQuad qa = schur_blocks(a, split);
  const SchurQuad qb = schur_blocks(b, split);
  auto restrict = [](const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd r(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r(i) = v(idx[i]);
    return r;
  };
  std::vector<Eigen::VectorXd> p0, p1;
  for (const Eigen::VectorXd& v : probes) {
    detail::require(v.size() == a.rows(), "schur_distance: probe length mismatch");
    p0.push_back(restrict(v, split.part0));
    p1.push_back(restrict(v, split.part1));
  }
  const Eigen::MatrixXd d00 = qa.q00 - qb.q00, d10 = qa.q10 - qb.q10;
  const Eigen::MatrixXd d01 = qa.q01 - qb.q01, dS = qa.qS - qb.qS;
  double dist = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i)
    for (std::size_t j = 0; j < probes.size(); ++j) {
      dist = std::max(dist, std::abs(p0[i].dot(d00 * p0[j])));
      dist = std::max(dist, std::abs(p1[i].dot(d10 * p0[j])));
      dist = std::max(dist, std::abs(p0[i].dot(d01 * p1[j])));
      dist = std::max(dist, std::abs(p1[i].dot(dS * p1[j])));
    }
  return dist;
}

// ---------------------------------------------------------------------------
// Limit laws of the example families
// ---------------------------------------------------------------------------

/// Material constants of the two-dimensional and Maxwell examples.
struct MaterialConstants {
  double eps0 = 1.0;
  double mu0 = 1.0;
  double eps = 1.0;
  double mu = 1.0;
  double sigma = 1.0;
  double nu0 = 0.5;  // the arbitrary positive lower abscissa of the examples
};

enum class ExampleId { EX1, EX2, EX3, EX4, EX5, MAXWELL };

inline std::string to_string(ExampleId id) {
  switch (id) {
    case ExampleId::EX1: return "EX1";
    case ExampleId::EX2: return "EX2";
    case ExampleId::EX3: return "EX3";
    case ExampleId::EX4: return "EX4";
    case ExampleId::EX5: return "EX5";
    case ExampleId::MAXWELL: return "MAXWELL";
  }
  return "?";
}

inline ExampleId parse_example(const std::string& s) {
  for (ExampleId id : {ExampleId::EX1, ExampleId::EX2, ExampleId::EX3, ExampleId::EX4, ExampleId::EX5,
                       ExampleId::MAXWELL})
    if (to_string(id) == s) return id;
  throw ValidationError("unknown example id '" + s + "' (expected EX1..EX5 or MAXWELL)");
}

/// Homogenised law of an example family. The EX1 limit is the series law
/// (see series_material_law) and has no representation here.
inline MaterialLaw build_limit_law(ExampleId id, const MaterialConstants& k = {}) {
  using CF = CoefficientField;
  const CF in = CF::omega1();
  const CF out = CF(1.0) - in;
  MaterialLaw law;
  law.name = to_string(id) + "-hom";
  switch (id) {
    case ExampleId::EX1:
      throw ValidationError("build_limit_law: the EX1 limit is the non-rational series law");
    case ExampleId::EX2:
      law.nu0 = k.nu0;
      law.add_slot("u", {0.5, 0.5, {}});
      law.add_slot("v", {1.0, 0.0, {}});
      law.positivity = std::min(1.0, k.nu0);
      law.bound = std::max(1.0, 1.0 / k.nu0);
      return law;
    case ExampleId::EX3: {
      // (-1, 0): the weak-* limit 1 of 1 + z^-1 sin(2 pi n x); (0, 1): the series law.
      law.nu0 = 2.0;
      law.add_slot("u", {1.0, 0.0, {}});
      law.add_slot("v", {1.0, 0.0, {}});
      law.series_support = CF::region(Box{1, {0.0, 0, 0}, {1.0, 0, 0}});
      return law;
    }
    case ExampleId::EX4:
      law.nu0 = k.nu0;
      law.add_slot("u", {CF(0.5) * in + CF(k.eps0) * out, CF(0.5) * in, {}});
      law.add_slot("vx", {CF(1.5) * in + CF(k.mu0) * out, 0.0, {}});
      law.add_slot("vy", {CF(4.0 / 3.0) * in + CF(k.mu0) * out, 0.0, {}});
      return law;
    case ExampleId::EX5:
      law.nu0 = k.nu0;
      law.add_slot("u", {CF(1.5) * in + CF(k.eps0) * out, 0.0, {}});
      law.add_slot("vx", {CF(0.5) * in + CF(k.mu0) * out, CF(0.5) * in, {}});
      law.add_slot("vy", {CF(k.mu0) * out, CF(2.0) * in, {MemoryTerm{-2.0, in, 1.0, 1.0}}});
      return law;
    case ExampleId::MAXWELL: {
      law.nu0 = k.nu0;
      const double s = k.sigma;
      law.add_slot("E1", {CF(k.eps0) * out, CF(2.0 * s) * in, {MemoryTerm{-2.0 * s * s, in, s, k.eps}}});
      law.add_slot("E2", {CF(0.5 * k.eps) * in + CF(k.eps0) * out, CF(0.5 * s) * in, {}});
      law.add_slot("E3", {CF(0.5 * k.eps) * in + CF(k.eps0) * out, CF(0.5 * s) * in, {}});
      law.add_slot("H1", {CF(4.0 / 3.0 * k.mu) * in + CF(k.mu0) * out, 0.0, {}});
      law.add_slot("H2", {CF(1.5 * k.mu) * in + CF(k.mu0) * out, 0.0, {}});
      law.add_slot("H3", {CF(1.5 * k.mu) * in + CF(k.mu0) * out, 0.0, {}});
      return law;
    }
  }
  throw ValidationError("build_limit_law: unknown example");
}

}  // namespace evohom

#endif  // EVOHOM_HOMOGENISATION_HPP
