#ifndef EVOHOM_SOLVER_HPP
#define EVOHOM_SOLVER_HPP

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "analytic.hpp"
#include "assembly.hpp"
#include "error.hpp"
#include "material_law.hpp"
#include "space.hpp"
#include "timecore.hpp"

namespace evohom {

/// Right-hand side contribution F_slot(t, x) = signal(t) * shape(x).
struct Forcing {
  int slot = 0;
  CoefficientField shape = 1.0;
  TimeSignal signal = TimeSignal::unit_step();
};

/// Discrete evolution problem (d_t M0 + M1 + A) U = F, U(0) = U0.
struct EvolutionProblem {
  FieldSpace space;
  MaterialLaw law;  // memory-free, one slot per FieldSpace slot
  SkewBlockOperator A;
  std::vector<Forcing> forcing;
  Vector U0;  // coefficient vector; empty means zero
  TimeGrid grid = TimeGrid::uniform(1.0, 1);
  double rho = 0.0;
  int quadrature_points = 0;  // spatial Gauss points per axis, 0 = automatic
  /// Integrate M0, M1 and the loads with the nodal rule of each space (mass lumping).
  /// Requires memory-free laws without couplings and spaces admitting a nodal rule.
  bool nodal_quadrature = false;
};

/// Spatial matrices of a problem: mass-type K0, K1 and the load vector of each forcing term.
struct SpatialOperators {
  SparseMatrix K0;
  SparseMatrix K1;
  SparseMatrix L;  // K1 + A
  std::vector<Vector> loads;
};

inline void validate(const EvolutionProblem& p) {
  const int slots = p.space.slot_count();
  if (p.law.size() != slots)
    throw ValidationError("EvolutionProblem: law has " + std::to_string(p.law.size()) +
                          " slots but the space has " + std::to_string(slots));
  if (p.law.has_memory())
    throw ValidationError("EvolutionProblem: law '" + p.law.name + "' has memory terms; augment it first");
  if (p.law.series_support)
    throw ValidationError("EvolutionProblem: law '" + p.law.name + "' contains the non-rational series law");
  if (p.A.size != p.space.ndofs())
    throw ValidationError("EvolutionProblem: operator size does not match the space");
  for (const Forcing& f : p.forcing)
    if (f.slot < 0 || f.slot >= slots) throw ValidationError("EvolutionProblem: forcing slot out of range");
  if (p.nodal_quadrature && !p.law.couplings.empty())
    throw ValidationError("EvolutionProblem: nodal quadrature does not support slot couplings");
  if (p.U0.size() != 0 && p.U0.size() != p.space.ndofs())
    throw ValidationError("EvolutionProblem: initial datum has the wrong length");
}

inline SpatialOperators assemble_spatial_operators(const EvolutionProblem& p) {
  validate(p);
  const FieldSpace& fs = p.space;
  const Mesh& mesh = fs.mesh();
  const int N = fs.ndofs();
  std::vector<Triplet> t0, t1;
  auto scatter = [](std::vector<Triplet>& t, const SparseMatrix& m, int r0, int c0, bool both) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
        t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
        if (both) t.emplace_back(c0 + it.col(), r0 + it.row(), it.value());
      }
  };
  for (int i = 0; i < fs.slot_count(); ++i) {
    const Slot& s = fs.slot(i);
    const LawEntry& e = p.law.entries[i];
    if (p.nodal_quadrature) {
      scatter(t0, nodal_mass_matrix(mesh, s.space, e.m0), s.offset, s.offset, false);
      scatter(t1, nodal_mass_matrix(mesh, s.space, e.m1), s.offset, s.offset, false);
      continue;
    }
    scatter(t0, mass_matrix(mesh, s.space, s.space, e.m0, p.quadrature_points), s.offset, s.offset, false);
    scatter(t1, mass_matrix(mesh, s.space, s.space, e.m1, p.quadrature_points), s.offset, s.offset, false);
  }
  for (const Coupling& c : p.law.couplings) {
    const Slot& a = fs.slot(c.i);
    const Slot& b = fs.slot(c.j);
    scatter(t0, mass_matrix(mesh, a.space, b.space, c.m0, p.quadrature_points), a.offset, b.offset, true);
    scatter(t1, mass_matrix(mesh, a.space, b.space, c.m1, p.quadrature_points), a.offset, b.offset, true);
  }
  SpatialOperators ops;
  ops.K0.resize(N, N);
  ops.K1.resize(N, N);
  ops.K0.setFromTriplets(t0.begin(), t0.end());
  ops.K1.setFromTriplets(t1.begin(), t1.end());
  ops.L = ops.K1 + p.A.A;
  for (const Forcing& f : p.forcing) {
    const Slot& s = fs.slot(f.slot);
    Vector b = Vector::Zero(N);
    b.segment(s.offset, s.space.ndofs()) = p.nodal_quadrature ? nodal_load_vector(mesh, s.space, f.shape)
                                                              : load_vector(mesh, s.space, f.shape, p.quadrature_points);
    ops.loads.push_back(std::move(b));
  }
  return ops;
}

/// Per-slab Legendre coefficients: U(t) = c0[m] + c1[m] (2 (t - t_{m-1}) / h_m - 1) on slab m.
struct EvolutionSolution {
  TimeGrid grid = TimeGrid::uniform(1.0, 1);
  std::vector<Vector> c0;  // index m - 1
  std::vector<Vector> c1;

  int slabs() const { return grid.slabs(); }
  Vector right_trace(int m) const { return c0.at(m - 1) + c1.at(m - 1); }
  Vector left_trace(int m) const { return c0.at(m - 1) - c1.at(m - 1); }

  /// Coefficient vector at t in (0, T], right-continuous per the half-open slabs.
  Vector at(double t) const {
    const int m = grid.locate(t);
    const double s = (t - grid.start(m)) / grid.length(m);
    return c0[m - 1] + temporal_basis(1, s) * c1[m - 1];
  }
};

/// Slab matrix and right-hand side of the dG(1) scheme; unknowns are interleaved
/// as (2 * dof + temporal index).
struct SlabSystem {
  SparseMatrix matrix;
  Vector rhs;
};

namespace detail {

inline SparseMatrix slab_matrix(const SpatialOperators& ops, const SlabTemporalMatrices& tm) {
  const int N = static_cast<int>(ops.K0.rows());
  std::vector<Triplet> t;
  t.reserve(4 * static_cast<std::size_t>(ops.K0.nonZeros() + ops.L.nonZeros()));
  auto add = [&](const SparseMatrix& m, auto coef) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m, k); it; ++it)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            const double c = coef(i, j);
            if (c != 0.0) t.emplace_back(2 * it.row() + i, 2 * it.col() + j, c * it.value());
          }
  };
  add(ops.K0, [&](int i, int j) { return tm.deriv[i][j] + tm.jump[i][j]; });
  add(ops.L, [&](int i, int j) { return tm.mass[i][j]; });
  SparseMatrix s(2 * N, 2 * N);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

inline Vector slab_rhs(const EvolutionProblem& p, const SpatialOperators& ops, const WeightedRadauRule& rule,
                       const SlabTemporalMatrices& tm, const Vector& prev_trace) {
  const int N = static_cast<int>(ops.K0.rows());
  Vector r = Vector::Zero(2 * N);
  const double h = rule.t1 - rule.t0;
  std::array<Vector, 2> part{Vector::Zero(N), Vector::Zero(N)};
  for (std::size_t f = 0; f < p.forcing.size(); ++f)
    for (int q = 0; q < 2; ++q) {
      const double sig = p.forcing[f].signal(rule.nodes[q]);
      if (sig == 0.0) continue;
      const double s = (rule.nodes[q] - rule.t0) / h;
      for (int i = 0; i < 2; ++i) part[i] += rule.weights[q] * sig * temporal_basis(i, s) * ops.loads[f];
    }
  const Vector k0prev = ops.K0 * prev_trace;
  for (int i = 0; i < 2; ++i) {
    part[i] += tm.left_value[i] * k0prev;
    for (int d = 0; d < N; ++d) r(2 * d + i) = part[i](d);
  }
  return r;
}

}  // namespace detail

/// Matrix and right-hand side of slab m; prev_trace is U0 for m = 1 and the
/// right trace of slab m - 1 otherwise.
inline SlabSystem assemble_slab_system(const EvolutionProblem& p, const SpatialOperators& ops, int m,
                                       const Vector& prev_trace) {
  detail::require(m >= 1 && m <= p.grid.slabs(), "assemble_slab_system: slab index out of range");
  detail::require(prev_trace.size() == ops.K0.rows(), "assemble_slab_system: trace length mismatch");
  const WeightedRadauRule rule = build_radau_rule(p.grid.start(m), p.grid.end(m), p.rho);
  const SlabTemporalMatrices tm = slab_temporal_matrices(rule);
  return {detail::slab_matrix(ops, tm), detail::slab_rhs(p, ops, rule, tm, prev_trace)};
}

/// March the dG(1) scheme over all slabs. One factorisation is reused for every
/// slab of the same length.
inline EvolutionSolution solve_evolution(const EvolutionProblem& p, const SpatialOperators& ops) {
  validate(p);
  const int N = static_cast<int>(ops.K0.rows());
  EvolutionSolution sol;
  sol.grid = p.grid;
  Vector prev = p.U0.size() ? p.U0 : Vector::Zero(N);
  using LU = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;
  std::unique_ptr<LU> lu;
  double lu_h = -1.0;
  for (int m = 1; m <= p.grid.slabs(); ++m) {
    const WeightedRadauRule rule = build_radau_rule(p.grid.start(m), p.grid.end(m), p.rho);
    const SlabTemporalMatrices tm = slab_temporal_matrices(rule);
    const double h = p.grid.length(m);
    if (!lu || std::abs(h - lu_h) > 1e-12 * h) {
      lu = std::make_unique<LU>();
      lu->analyzePattern(detail::slab_matrix(ops, tm));
      lu->factorize(detail::slab_matrix(ops, tm));
      if (lu->info() != Eigen::Success)
        throw SolverError("solve_evolution: slab " + std::to_string(m) +
                          " system is singular (" + lu->lastErrorMessage() + ")");
      lu_h = h;
    }
    const Vector x = lu->solve(detail::slab_rhs(p, ops, rule, tm, prev));
    if (lu->info() != Eigen::Success || !x.allFinite())
      throw SolverError("solve_evolution: slab " + std::to_string(m) + " solve failed");
    Vector c0(N), c1(N);
    for (int d = 0; d < N; ++d) {
      c0(d) = x(2 * d);
      c1(d) = x(2 * d + 1);
    }
    prev = c0 + c1;
    sol.c0.push_back(std::move(c0));
    sol.c1.push_back(std::move(c1));
  }
  return sol;
}

inline EvolutionSolution solve_evolution(const EvolutionProblem& p) {
  return solve_evolution(p, assemble_spatial_operators(p));
}

/// Values of every slot at time t and the given points; result(slot) has one entry per point.
inline std::vector<Vector> evaluate_solution(const EvolutionProblem& p, const EvolutionSolution& sol, double t,
                                             const std::vector<Point>& points) {
  const Vector c = sol.at(t);
  std::vector<Vector> out;
  for (const Slot& s : p.space.slots()) {
    const SparseMatrix e = evaluation_matrix(p.space.mesh(), s.space, points);
    out.push_back(e * c.segment(s.offset, s.space.ndofs()));
  }
  return out;
}

}  // namespace evohom

#endif  // EVOHOM_SOLVER_HPP
