#ifndef EVOHOM_TESTS_ORACLES_CELL_PROBLEM_HPP
#define EVOHOM_TESTS_ORACLES_CELL_PROBLEM_HPP

// Brute-force oracle for stratified homogenisation: solves the periodic cell
// problems of a coefficient a(y) depending on the first coordinate with a
// periodic cubic finite element method and forms the effective matrix from the
// correctors. Shares no code with the library.

#include <algorithm>
#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss.hpp>

namespace oracle {

using MatrixFn = std::function<Eigen::MatrixXd(double)>;

/// Eight-point Gauss rule on [0, 1] from Boost's tabulated abscissae.
inline void unit_gauss8(std::array<double, 8>& s, std::array<double, 8>& w) {
  using G = boost::math::quadrature::gauss<double, 8>;
  const auto& x = G::abscissa();
  const auto& wt = G::weights();
  for (int i = 0; i < 4; ++i) {
    s[i] = 0.5 * (1.0 - x[i]);
    s[7 - i] = 0.5 * (1.0 + x[i]);
    w[i] = w[7 - i] = 0.5 * wt[i];
  }
}

/// Derivative of the cubic Lagrange basis with nodes 0, 1/3, 2/3, 1 on [0, 1].
inline double dlagrange3(int a, double s) {
  static const double nodes[4] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  double sum = 0.0;
  for (int m = 0; m < 4; ++m) {
    if (m == a) continue;
    double prod = 1.0 / (nodes[a] - nodes[m]);
    for (int l = 0; l < 4; ++l)
      if (l != a && l != m) prod *= (s - nodes[l]) / (nodes[a] - nodes[l]);
    sum += prod;
  }
  return sum;
}

/// Effective matrix of a(y) with period 1. Cells are aligned with `breaks`
/// (discontinuities of a inside (0, 1)); `cells` is the total cell count.
/// Uses the energy form with primal and adjoint correctors, so the result
/// converges at twice the energy rate also for nonsymmetric a.
inline Eigen::MatrixXd cell_problem_tensor(int d, const MatrixFn& a, std::vector<double> breaks, int cells) {
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [](double b) { return b <= 0.0 || b >= 1.0; }),
               breaks.end());
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> cuts{0.0};
  cuts.insert(cuts.end(), breaks.begin(), breaks.end());
  cuts.push_back(1.0);
  std::vector<double> x{0.0};
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double len = cuts[k + 1] - cuts[k];
    const int m = std::max(2, static_cast<int>(std::lround(len * cells)));
    for (int i = 1; i <= m; ++i) x.push_back(cuts[k] + len * i / m);
  }
  const int nc = static_cast<int>(x.size()) - 1;
  const int ndof = 3 * nc;  // periodic: the last node is node 0
  auto dof = [&](int c, int a) { return (3 * c + a) % ndof; };

  std::array<double, 8> gs{}, gw{};
  unit_gauss8(gs, gw);
  std::vector<Eigen::MatrixXd> vals(static_cast<std::size_t>(nc) * 8);
  for (int c = 0; c < nc; ++c)
    for (int q = 0; q < 8; ++q) vals[c * 8 + q] = a(x[c] + gs[q] * (x[c + 1] - x[c]));

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::MatrixXd rhs_primal = Eigen::MatrixXd::Zero(ndof, d), rhs_adjoint = Eigen::MatrixXd::Zero(ndof, d);
  for (int c = 0; c < nc; ++c) {
    const double h = x[c + 1] - x[c];
    for (int q = 0; q < 8; ++q) {
      const Eigen::MatrixXd& m = vals[c * 8 + q];
      const double wq = gw[q] * h;
      double g[4];
      for (int i = 0; i < 4; ++i) g[i] = dlagrange3(i, gs[q]) / h;
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) trip.emplace_back(dof(c, i), dof(c, j), wq * m(0, 0) * g[i] * g[j]);
        for (int k = 0; k < d; ++k) {
          rhs_primal(dof(c, i), k) -= wq * m(0, k) * g[i];
          rhs_adjoint(dof(c, i), k) -= wq * m(k, 0) * g[i];
        }
      }
    }
  }
  // Pin the additive constant by replacing DOF 0 with w(0) = 0.
  Eigen::SparseMatrix<double> K(ndof, ndof);
  K.setFromTriplets(trip.begin(), trip.end());
  K = K.pruned();
  std::vector<Eigen::Triplet<double>> pinned;
  for (int k = 0; k < K.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it)
      if (it.row() != 0 && it.col() != 0) pinned.emplace_back(it.row(), it.col(), it.value());
  pinned.emplace_back(0, 0, 1.0);
  Eigen::SparseMatrix<double> Kp(ndof, ndof);
  Kp.setFromTriplets(pinned.begin(), pinned.end());
  rhs_primal.row(0).setZero();
  rhs_adjoint.row(0).setZero();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(Kp);
  const Eigen::MatrixXd w = lu.solve(rhs_primal), v = lu.solve(rhs_adjoint);

  Eigen::MatrixXd hom = Eigen::MatrixXd::Zero(d, d);
  for (int c = 0; c < nc; ++c) {
    const double h = x[c + 1] - x[c];
    for (int q = 0; q < 8; ++q) {
      const Eigen::MatrixXd& m = vals[c * 8 + q];
      Eigen::VectorXd dw = Eigen::VectorXd::Zero(d), dv = Eigen::VectorXd::Zero(d);
      for (int i = 0; i < 4; ++i) {
        const double g = dlagrange3(i, gs[q]) / h;
        dw += g * w.row(dof(c, i)).transpose();
        dv += g * v.row(dof(c, i)).transpose();
      }
      // (e_i + v_i' e_0)^T a (e_j + w_j' e_0)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          hom(i, j) += gw[q] * h * (m(i, j) + m(i, 0) * dw(j) + dv(i) * m(0, j) + dv(i) * m(0, 0) * dw(j));
    }
  }
  return hom;
}

}  // namespace oracle

#endif  // EVOHOM_TESTS_ORACLES_CELL_PROBLEM_HPP
