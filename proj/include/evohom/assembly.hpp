#ifndef EVOHOM_ASSEMBLY_HPP
#define EVOHOM_ASSEMBLY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "coefficient.hpp"
#include "error.hpp"
#include "gauss.hpp"
#include "space.hpp"

namespace evohom {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Vector = Eigen::VectorXd;

namespace detail {

// Quadrature points of one cell along one axis, split at coefficient breakpoints.
struct AxisPoints {
  std::vector<double> s;  // reference coordinate in [0, 1]
  std::vector<double> w;  // physical weight
  std::vector<double> x;  // physical coordinate
};

inline AxisPoints axis_points(double lo, double hi, const std::vector<double>& breaks, int nq) {
  AxisPoints ap;
  const LineRule& r = gauss_legendre(nq);
  std::vector<double> cuts{lo};
  for (double b : breaks)
    if (b > lo + 1e-14 * (hi - lo) && b < hi - 1e-14 * (hi - lo)) cuts.push_back(b);
  cuts.push_back(hi);
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    for (int q = 0; q < r.size(); ++q) {
      const double x = a + (b - a) * r.x[q];
      ap.x.push_back(x);
      ap.s.push_back((x - lo) / (hi - lo));
      ap.w.push_back((b - a) * r.w[q]);
    }
  }
  return ap;
}

// Breakpoints of a coefficient restricted to one cell, from a presorted list.
inline std::vector<double> cell_breaks(const std::vector<double>& all, double lo, double hi) {
  auto b = std::upper_bound(all.begin(), all.end(), lo);
  auto e = std::lower_bound(all.begin(), all.end(), hi);
  return b < e ? std::vector<double>(b, e) : std::vector<double>{};
}

// Values (deriv = false) or d/dx (deriv = true) of the local shapes at the axis points.
inline std::vector<double> axis_table(const Space1D& sp, const AxisPoints& ap, bool deriv, double h) {
  const int nl = sp.local_size(), nq = static_cast<int>(ap.s.size());
  std::vector<double> t(static_cast<std::size_t>(nl) * nq);
  for (int a = 0; a < nl; ++a)
    for (int q = 0; q < nq; ++q)
      t[a * nq + q] = deriv ? sp.dshape(a, ap.s[q]) / h : sp.shape(a, ap.s[q]);
  return t;
}

inline int default_points(int degree_sum) { return std::max(degree_sum / 2 + 2, 4); }

}  // namespace detail

/// Derivative selector for one factor of a bilinear form: -1 value, 0 d/dx, 1 d/dy.
struct FormFactor {
  const ScalarSpace* space;
  int deriv = -1;
};

/// Assemble  B_ij = int c(x) D_test phi_i D_trial psi_j  on the shared tensor mesh.
/// `points` overrides the Gauss point count per axis and per sub-interval.
inline SparseMatrix assemble_form(const Mesh& mesh, FormFactor test, FormFactor trial,
                                  const CoefficientField& coeff, int points = 0) {
  const ScalarSpace& A = *test.space;
  const ScalarSpace& B = *trial.space;
  detail::require(A.x().mesh().cells() == mesh.x.cells() && B.x().mesh().cells() == mesh.x.cells() &&
                      A.y().mesh().cells() == mesh.y.cells() && B.y().mesh().cells() == mesh.y.cells(),
                  "assemble_form: spaces do not share the mesh");
  const int nqx = points > 0 ? points : detail::default_points(A.x().degree() + B.x().degree());
  const int nqy = mesh.dimension == 1 ? 1
                  : points > 0        ? points
                                      : detail::default_points(A.y().degree() + B.y().degree());
  const std::vector<double> bx = coeff.breakpoints(0, mesh.x.lo(), mesh.x.hi());
  const std::vector<double> by =
      mesh.dimension == 1 ? std::vector<double>{} : coeff.breakpoints(1, mesh.y.lo(), mesh.y.hi());
  const bool const_coeff = coeff.is_constant();
  const double c0 = const_coeff ? coeff(0.0, 0.0) : 0.0;

  const int nax = A.x().local_size(), nay = A.y().local_size();
  const int nbx = B.x().local_size(), nby = B.y().local_size();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.cells()) * nax * nay * nbx * nby);
  std::vector<double> local(static_cast<std::size_t>(nax) * nay * nbx * nby);

  // Axis tables depend only on the cell column/row; cache them per index.
  struct AxisCache {
    detail::AxisPoints pts;
    std::vector<double> ta, tb;
  };
  auto make_axis = [&](const Mesh1D& m, int c, const std::vector<double>& br, int nq,
                       const Space1D& sa, const Space1D& sb, bool da, bool db) {
    AxisCache ac;
    const double lo = m.cell_lo(c), hi = m.cell_hi(c);
    ac.pts = detail::axis_points(lo, hi, detail::cell_breaks(br, lo, hi), nq);
    ac.ta = detail::axis_table(sa, ac.pts, da, hi - lo);
    ac.tb = detail::axis_table(sb, ac.pts, db, hi - lo);
    return ac;
  };
  std::vector<AxisCache> ycache;
  ycache.reserve(mesh.y.cells());
  for (int cy = 0; cy < mesh.y.cells(); ++cy)
    ycache.push_back(make_axis(mesh.y, cy, by, nqy, A.y(), B.y(), test.deriv == 1, trial.deriv == 1));

  std::vector<double> cval;
  for (int cx = 0; cx < mesh.x.cells(); ++cx) {
    const AxisCache xc =
        make_axis(mesh.x, cx, bx, nqx, A.x(), B.x(), test.deriv == 0, trial.deriv == 0);
    const int qx = static_cast<int>(xc.pts.s.size());
    for (int cy = 0; cy < mesh.y.cells(); ++cy) {
      const AxisCache& yc = ycache[cy];
      const int qy = static_cast<int>(yc.pts.s.size());
      cval.assign(static_cast<std::size_t>(qx) * qy, c0);
      if (!const_coeff)
        for (int i = 0; i < qx; ++i)
          for (int j = 0; j < qy; ++j) cval[i * qy + j] = coeff(xc.pts.x[i], yc.pts.x[j]);
      std::fill(local.begin(), local.end(), 0.0);
      // local[(ax, ay), (bx, by)] = sum_ij w c Ax(ax,i) Bx(bx,i) Ay(ay,j) By(by,j)
      for (int ax = 0; ax < nax; ++ax)
        for (int bxi = 0; bxi < nbx; ++bxi)
          for (int i = 0; i < qx; ++i) {
            const double fx = xc.pts.w[i] * xc.ta[ax * qx + i] * xc.tb[bxi * qx + i];
            if (fx == 0.0) continue;
            for (int ay = 0; ay < nay; ++ay)
              for (int byi = 0; byi < nby; ++byi) {
                double sy = 0.0;
                for (int j = 0; j < qy; ++j)
                  sy += yc.pts.w[j] * cval[i * qy + j] * yc.ta[ay * qy + j] * yc.tb[byi * qy + j];
                local[((ax * nay + ay) * nbx + bxi) * nby + byi] += fx * sy;
              }
          }
      for (int ax = 0; ax < nax; ++ax) {
        const int gx = A.x().dof(cx, ax);
        if (gx < 0) continue;
        for (int ay = 0; ay < nay; ++ay) {
          const int gy = A.y().dof(cy, ay);
          if (gy < 0) continue;
          const int row = A.index(gx, gy);
          for (int bxi = 0; bxi < nbx; ++bxi) {
            const int hx = B.x().dof(cx, bxi);
            if (hx < 0) continue;
            for (int byi = 0; byi < nby; ++byi) {
              const int hy = B.y().dof(cy, byi);
              if (hy < 0) continue;
              const double v = local[((ax * nay + ay) * nbx + bxi) * nby + byi];
              if (v != 0.0) trip.emplace_back(row, B.index(hx, hy), v);
            }
          }
        }
      }
    }
  }
  SparseMatrix m(A.ndofs(), B.ndofs());
  m.setFromTriplets(trip.begin(), trip.end());
  m.prune(0.0);
  return m;
}

/// Weighted mass matrix  int c phi_i psi_j.
inline SparseMatrix mass_matrix(const Mesh& mesh, const ScalarSpace& test, const ScalarSpace& trial,
                                const CoefficientField& coeff = 1.0, int points = 0) {
  return assemble_form(mesh, {&test, -1}, {&trial, -1}, coeff, points);
}

/// Coupling  int c phi_i d_axis psi_j.
inline SparseMatrix derivative_coupling(const Mesh& mesh, const ScalarSpace& test,
                                        const ScalarSpace& trial, int axis,
                                        const CoefficientField& coeff = 1.0, int points = 0) {
  return assemble_form(mesh, {&test, -1}, {&trial, axis}, coeff, points);
}

/// Matrix of the form  <C grad u, grad v>  for a constant 2x2 matrix C (u trial, v test).
inline SparseMatrix gradient_form(const Mesh& mesh, const ScalarSpace& space, const Eigen::Matrix2d& C) {
  SparseMatrix m(space.ndofs(), space.ndofs());
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      if (C(a, b) != 0.0) m += assemble_form(mesh, {&space, a}, {&space, b}, C(a, b));
  return m;
}

/// Load vector  int c phi_i.
inline Vector load_vector(const Mesh& mesh, const ScalarSpace& space, const CoefficientField& coeff,
                          int points = 0) {
  const ScalarSpace one(Space1D(mesh.x, {0, Continuity::discontinuous}),
                        Space1D(mesh.y, {0, Continuity::discontinuous}));
  // Integrate against piecewise constants, then sum over cells.
  const SparseMatrix m = mass_matrix(mesh, space, one, coeff, points);
  return m * Vector::Ones(one.ndofs());
}

/// Weights of the quadrature rule on [0, 1] whose nodes are the Lagrange nodes of `s`, if one
/// exists: midpoint (degree 0), trapezoid (equispaced degree 1), Simpson (equispaced degree 2)
/// and the Gauss rule of a Gauss node layout. Empty otherwise.
inline std::vector<double> nodal_rule_weights(const Space1D& s) {
  const int k = s.degree();
  if (k == 0) return {1.0};
  if (s.options().layout == NodeLayout::gauss) return gauss_legendre(k + 1).w;
  if (k == 1) return {0.5, 0.5};
  if (k == 2) return {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
  return {};
}

/// Lumped counterpart of mass_matrix: the form  int c phi_i phi_j  integrated with the nodal
/// rule of the space, which makes the matrix diagonal. Node values of c are one-sided limits
/// from inside each cell.
inline SparseMatrix nodal_mass_matrix(const Mesh& mesh, const ScalarSpace& space, const CoefficientField& coeff = 1.0) {
  const Space1D& sx = space.x();
  const Space1D& sy = space.y();
  const std::vector<double> wx = nodal_rule_weights(sx), wy = nodal_rule_weights(sy);
  if (wx.empty() || wy.empty())
    throw ValidationError("nodal_mass_matrix: no nodal quadrature rule for " + space.describe());
  Vector diag = Vector::Zero(space.ndofs());
  for (int cx = 0; cx < mesh.x.cells(); ++cx) {
    const double hx = mesh.x.cell_size(cx);
    for (int cy = 0; cy < mesh.y.cells(); ++cy) {
      const double hy = mesh.y.cell_size(cy);
      for (int a = 0; a < sx.local_size(); ++a) {
        const int ix = sx.dof(cx, a);
        if (ix < 0) continue;
        // Nudge endpoints into the cell so discontinuous coefficients give the cell's trace.
        const double px = std::clamp(sx.node(a), 1e-12, 1.0 - 1e-12);
        for (int b = 0; b < sy.local_size(); ++b) {
          const int iy = sy.dof(cy, b);
          if (iy < 0) continue;
          const double py = std::clamp(sy.node(b), 1e-12, 1.0 - 1e-12);
          const double c = coeff(mesh.x.cell_lo(cx) + hx * px, mesh.y.cell_lo(cy) + hy * py, 0.0);
          diag(space.index(ix, iy)) += hx * hy * wx[a] * wy[b] * c;
        }
      }
    }
  }
  SparseMatrix m(space.ndofs(), space.ndofs());
  std::vector<Triplet> trip;
  for (int i = 0; i < diag.size(); ++i)
    if (diag(i) != 0.0) trip.emplace_back(i, i, diag(i));
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

/// Load vector  int c phi_i  with the nodal rule of the space.
inline Vector nodal_load_vector(const Mesh& mesh, const ScalarSpace& space, const CoefficientField& coeff) {
  return nodal_mass_matrix(mesh, space, coeff).diagonal();
}

/// Sparse point-evaluation matrix: row p holds the shape values of `space` at points[p].
/// Points on a cell boundary take the cell on the right (left at the upper end).
inline SparseMatrix evaluation_matrix(const Mesh& mesh, const ScalarSpace& space,
                                      const std::vector<Point>& points) {
  std::vector<Triplet> trip;
  const Space1D& sx = space.x();
  const Space1D& sy = space.y();
  for (std::size_t p = 0; p < points.size(); ++p) {
    const double x = points[p][0];
    const int cx = mesh.x.locate(x);
    detail::require(cx >= 0, "evaluation_matrix: point outside the mesh");
    const double s = (x - mesh.x.cell_lo(cx)) / mesh.x.cell_size(cx);
    int cy = 0;
    double t = 0.5;
    if (mesh.dimension == 2) {
      const double y = points[p][1];
      cy = mesh.y.locate(y);
      detail::require(cy >= 0, "evaluation_matrix: point outside the mesh");
      t = (y - mesh.y.cell_lo(cy)) / mesh.y.cell_size(cy);
    }
    for (int a = 0; a < sx.local_size(); ++a) {
      const int gx = sx.dof(cx, a);
      if (gx < 0) continue;
      const double vx = sx.shape(a, s);
      if (vx == 0.0) continue;
      for (int b = 0; b < sy.local_size(); ++b) {
        const int gy = sy.dof(cy, b);
        if (gy < 0) continue;
        const double v = vx * sy.shape(b, t);
        if (v != 0.0) trip.emplace_back(static_cast<int>(p), space.index(gx, gy), v);
      }
    }
  }
  SparseMatrix e(static_cast<int>(points.size()), space.ndofs());
  e.setFromTriplets(trip.begin(), trip.end());
  return e;
}

// ---------------------------------------------------------------------------
// Skew operator
// ---------------------------------------------------------------------------

/// Spatial operator structure of an example.
enum class SkewStructure {
  none,                 // A = 0
  periodic_derivative,  // (0, d#; d#, 0) on H1#(0,1)^2
  glued_derivative,     // (0, d 1_{(-1,0)}; -(d 1_{(-1,0)})*, 0) on (-1,1)
  div_grad              // (0, div; grad0, 0) with u in H1_0 and v in H(div)
};

inline std::string to_string(SkewStructure s) {
  switch (s) {
    case SkewStructure::none: return "none";
    case SkewStructure::periodic_derivative: return "periodic_derivative";
    case SkewStructure::glued_derivative: return "glued_derivative";
    case SkewStructure::div_grad: return "div_grad";
  }
  return "?";
}

/// Named subset of global DOFs (discrete analogue of ker A or ran A).
struct DecompositionPart {
  std::string name;
  std::vector<char> mask;
};

/// A = (0, D; -D^T, 0) embedded in the global vector of a FieldSpace.
struct SkewBlockOperator {
  SkewStructure structure = SkewStructure::none;
  int size = 0;
  int row_begin = 0, row_end = 0;  // global range of the first block
  int col_begin = 0, col_end = 0;  // global range of the second block
  SparseMatrix D;
  SparseMatrix A;
  std::vector<DecompositionPart> parts;

  /// max |A + A^T| / max |A|, zero for A = 0.
  double skew_defect() const {
    const SparseMatrix s = A + SparseMatrix(A.transpose());
    double smax = 0.0, amax = 0.0;
    for (int k = 0; k < s.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(s, k); it; ++it) smax = std::max(smax, std::abs(it.value()));
    for (int k = 0; k < A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) amax = std::max(amax, std::abs(it.value()));
    return amax == 0.0 ? smax : smax / amax;
  }
};

namespace detail {

inline bool has_zero_at(const Space1D& s, double p, int side) {
  for (const PointConstraint& c : s.options().zeros)
    if (std::abs(c.point - p) < 1e-12 && (c.side == side || c.side == 0)) return true;
  return false;
}

inline void conformity(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("assemble_skew_operator: nonconforming spaces: " + what);
}

}  // namespace detail

/// Assemble the skew operator of `structure` on the leading slots of `fs`
/// (u in slot 0, v in slot 1 or v_x, v_y in slots 1 and 2). Extra slots get zero rows.
inline SkewBlockOperator assemble_skew_operator(SkewStructure structure, const FieldSpace& fs) {
  SkewBlockOperator op;
  op.structure = structure;
  op.size = fs.ndofs();
  op.A.resize(op.size, op.size);
  if (structure == SkewStructure::none) return op;
  const Mesh& mesh = fs.mesh();
  detail::conformity(fs.slot_count() >= 2, "need at least two slots");
  const Slot& u = fs.slot(0);
  op.row_begin = u.offset;
  op.row_end = u.offset + u.space.ndofs();
  op.col_begin = fs.slot(1).offset;

  switch (structure) {
    case SkewStructure::periodic_derivative: {
      const Slot& v = fs.slot(1);
      detail::conformity(mesh.dimension == 1, "periodic derivative is one-dimensional");
      detail::conformity(u.space.x().options().periodic && v.space.x().options().periodic,
                         "both components must be periodic H1");
      op.D = derivative_coupling(mesh, u.space, v.space, 0);
      op.col_end = v.offset + v.space.ndofs();
      break;
    }
    case SkewStructure::glued_derivative: {
      const Slot& v = fs.slot(1);
      detail::conformity(mesh.dimension == 1, "glued derivative is one-dimensional");
      detail::conformity(std::abs(mesh.x.lo() + 1.0) < 1e-12 && mesh.x.find_node(0.0) > 0,
                         "domain must be (-1, 1) with 0 as a mesh node");
      detail::conformity(u.space.x().continuous() && v.space.x().continuous(),
                         "both components must be H1 on (-1, 0)");
      detail::conformity(detail::has_zero_at(u.space.x(), -1.0, 1),
                         "first component needs the zero trace at -1");
      detail::conformity(detail::has_zero_at(v.space.x(), 0.0, -1),
                         "second component needs the zero trace at 0 from the left");
      const Box left{1, {-1.0, 0, 0}, {0.0, 0, 0}};
      op.D = derivative_coupling(mesh, u.space, v.space, 0, CoefficientField::region(left));
      op.col_end = v.offset + v.space.ndofs();
      // ran A: all DOFs living on (-1, 0); ker A: the rest.
      DecompositionPart ran{"ran", std::vector<char>(op.size, 0)};
      for (int s = 0; s < 2; ++s) {
        const Slot& sl = fs.slot(s);
        const Space1D& sx = sl.space.x();
        for (int c = 0; c < mesh.x.cells(); ++c) {
          if (mesh.x.cell_hi(c) > 1e-14) continue;
          for (int a = 0; a < sx.local_size(); ++a)
            if (sx.dof(c, a) >= 0) ran.mask[sl.offset + sx.dof(c, a)] = 1;
        }
      }
      DecompositionPart ker{"ker", std::vector<char>(op.size, 0)};
      for (int s = 0; s < 2; ++s) {
        const Slot& sl = fs.slot(s);
        for (int i = sl.offset; i < sl.offset + sl.space.ndofs(); ++i) ker.mask[i] = !ran.mask[i];
      }
      op.parts = {ran, ker};
      break;
    }
    case SkewStructure::div_grad: {
      detail::conformity(mesh.dimension == 2 && fs.slot_count() >= 3, "div/grad needs u, v_x, v_y");
      const Slot& vx = fs.slot(1);
      const Slot& vy = fs.slot(2);
      detail::conformity(u.space.x().continuous() && u.space.y().continuous() &&
                             detail::has_zero_at(u.space.x(), mesh.x.lo(), 1) &&
                             detail::has_zero_at(u.space.y(), mesh.y.lo(), 1),
                         "first component must be H1_0");
      detail::conformity(vx.space.x().continuous() && vy.space.y().continuous(),
                         "second component must be H(div)");
      detail::conformity(vy.offset == vx.offset + vx.space.ndofs(), "v_x and v_y must be adjacent");
      const SparseMatrix dx = derivative_coupling(mesh, u.space, vx.space, 0);
      const SparseMatrix dy = derivative_coupling(mesh, u.space, vy.space, 1);
      std::vector<Triplet> t;
      for (int k = 0; k < dx.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(dx, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
      for (int k = 0; k < dy.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(dy, k); it; ++it)
          t.emplace_back(it.row(), vx.space.ndofs() + it.col(), it.value());
      op.D.resize(u.space.ndofs(), vx.space.ndofs() + vy.space.ndofs());
      op.D.setFromTriplets(t.begin(), t.end());
      op.col_end = vy.offset + vy.space.ndofs();
      break;
    }
    case SkewStructure::none: break;
  }
  std::vector<Triplet> t;
  for (int k = 0; k < op.D.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(op.D, k); it; ++it) {
      t.emplace_back(op.row_begin + it.row(), op.col_begin + it.col(), it.value());
      t.emplace_back(op.col_begin + it.col(), op.row_begin + it.row(), -it.value());
    }
  op.A.setFromTriplets(t.begin(), t.end());
  return op;
}

}  // namespace evohom

#endif  // EVOHOM_ASSEMBLY_HPP
