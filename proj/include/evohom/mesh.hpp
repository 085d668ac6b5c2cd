#ifndef EVOHOM_MESH_HPP
#define EVOHOM_MESH_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"

namespace evohom {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

/// Strictly increasing cell boundaries of a 1D mesh.
class Mesh1D {
 public:
  Mesh1D() : Mesh1D(std::vector<double>{0.0, 1.0}) {}
  explicit Mesh1D(std::vector<double> nodes) : x_(std::move(nodes)) {
    detail::require(x_.size() >= 2, "Mesh1D: need at least one cell");
    for (std::size_t i = 1; i < x_.size(); ++i)
      detail::require(x_[i] > x_[i - 1], "Mesh1D: cell boundaries must be strictly increasing");
  }

  static Mesh1D uniform(Interval dom, int cells) {
    detail::require(cells >= 1, "Mesh1D: subdivisions must be at least 1");
    std::vector<double> x(cells + 1);
    for (int i = 0; i <= cells; ++i) x[i] = dom.lo + dom.length() * i / cells;
    x[cells] = dom.hi;
    return Mesh1D(std::move(x));
  }

  int cells() const { return static_cast<int>(x_.size()) - 1; }
  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }
  double node(int i) const { return x_[i]; }
  double cell_lo(int c) const { return x_[c]; }
  double cell_hi(int c) const { return x_[c + 1]; }
  double cell_size(int c) const { return x_[c + 1] - x_[c]; }
  const std::vector<double>& nodes() const { return x_; }

  /// Index of the node equal to p (to rounding) or -1.
  int find_node(double p) const {
    const double tol = 1e-12 * std::max(1.0, hi() - lo());
    auto it = std::lower_bound(x_.begin(), x_.end(), p - tol);
    if (it != x_.end() && std::abs(*it - p) <= tol) return static_cast<int>(it - x_.begin());
    return -1;
  }

  /// Cell containing p; side < 0 selects the left cell at an interior node.
  int locate(double p, int side = 1) const {
    if (p < lo() || p > hi()) return -1;
    auto it = side < 0 ? std::lower_bound(x_.begin(), x_.end(), p)
                       : std::upper_bound(x_.begin(), x_.end(), p);
    int c = static_cast<int>(it - x_.begin()) - 1;
    return std::clamp(c, 0, cells() - 1);
  }

 private:
  std::vector<double> x_;
};

/// Tensor mesh; one-dimensional problems carry the unit interval with one cell in y.
struct Mesh {
  int dimension = 1;
  Mesh1D x;
  Mesh1D y;
  int cells() const { return x.cells() * y.cells(); }
};

namespace detail {

inline bool near_integer(double v) { return std::abs(v - std::round(v)) < 1e-9; }

// Stripe edges k/(2n) inside `osc` must be mesh nodes: the uniform spacing on
// `osc` has to divide 1/(2n) and osc.lo must lie on the stripe lattice.
inline void check_alignment(Interval osc, int cells, int align_n) {
  if (align_n <= 0) return;
  const double lattice = 2.0 * align_n * osc.length();
  if (!near_integer(lattice) || !near_integer(2.0 * align_n * osc.lo))
    throw ValidationError("build_mesh: oscillation region is not on the stripe lattice of n = " +
                          std::to_string(align_n));
  const long multiple = std::lround(lattice);
  if (cells % multiple != 0)
    throw ValidationError("build_mesh: x-subdivision " + std::to_string(cells) +
                          " inside the oscillation region must be a multiple of " +
                          std::to_string(multiple) + " (= 2n per unit length, n = " +
                          std::to_string(align_n) + ")");
}

}  // namespace detail

/// Uniform 1D mesh of `cells` cells; align_n > 0 demands that every stripe edge
/// k/(2 align_n) inside the domain is a cell boundary.
inline Mesh build_mesh(Interval dom, int cells, int align_n = 0) {
  detail::require(dom.length() > 0.0, "build_mesh: empty domain");
  detail::require(cells >= 1, "build_mesh: subdivisions must be at least 1");
  detail::check_alignment(dom, cells, align_n);
  return Mesh{1, Mesh1D::uniform(dom, cells), Mesh1D::uniform({0.0, 1.0}, 1)};
}

/// Graded x-lattice: spacing h inside `osc` and grading*h outside, with
/// cells_x cells in total; y is uniform with cells_y cells.
inline Mesh build_mesh(Interval dx, Interval dy, int cells_x, int cells_y, int align_n,
                       Interval osc, double grading = 4.0) {
  detail::require(dx.length() > 0.0 && dy.length() > 0.0, "build_mesh: empty rectangle");
  detail::require(cells_x >= 1 && cells_y >= 1, "build_mesh: subdivisions must be at least 1");
  detail::require(osc.lo >= dx.lo && osc.hi <= dx.hi && osc.length() > 0.0,
                  "build_mesh: oscillation region must lie inside the x-range");
  detail::require(grading >= 1.0, "build_mesh: grading must be at least 1");
  const double left = osc.lo - dx.lo, right = dx.hi - osc.hi;
  // cells_x = L_in / h + (L_left + L_right) / (grading h)
  const double h = (osc.length() + (left + right) / grading) / cells_x;
  const double n_in = osc.length() / h, n_left = left / (grading * h), n_right = right / (grading * h);
  if (!detail::near_integer(n_in) || !detail::near_integer(n_left) || !detail::near_integer(n_right))
    throw ValidationError("build_mesh: x-subdivision " + std::to_string(cells_x) +
                          " does not split the graded lattice into whole cells");
  const int in = static_cast<int>(std::lround(n_in));
  const int nl = static_cast<int>(std::lround(n_left));
  const int nr = static_cast<int>(std::lround(n_right));
  detail::check_alignment(osc, in, align_n);
  std::vector<double> x;
  for (int i = 0; i < nl; ++i) x.push_back(dx.lo + left * i / nl);
  for (int i = 0; i < in; ++i) x.push_back(osc.lo + osc.length() * i / in);
  for (int i = 0; i <= nr; ++i) x.push_back(nr ? osc.hi + right * i / nr : osc.hi);
  x.back() = dx.hi;
  return Mesh{2, Mesh1D(std::move(x)), Mesh1D::uniform(dy, cells_y)};
}

}  // namespace evohom

#endif  // EVOHOM_MESH_HPP
