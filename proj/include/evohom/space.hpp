#ifndef EVOHOM_SPACE_HPP
#define EVOHOM_SPACE_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "error.hpp"
#include "gauss.hpp"
#include "mesh.hpp"

namespace evohom {

enum class Continuity { continuous, discontinuous };

/// Placement of the Lagrange nodes on the reference cell [0, 1].
enum class NodeLayout { equispaced, gauss };

/// Elimination of the nodal value at `point`; side < 0 takes the trace from the
/// cell on the left, side > 0 from the right, side == 0 both.
struct PointConstraint {
  double point = 0.0;
  int side = 0;
};

struct Space1DOptions {
  int degree = 1;
  Continuity continuity = Continuity::continuous;
  bool periodic = false;
  std::vector<double> breaks;              // interior nodes where continuity is not enforced
  std::vector<PointConstraint> zeros;
  NodeLayout layout = NodeLayout::equispaced;
};

/// Piecewise polynomial Lagrange space on a 1D mesh.
class Space1D {
 public:
  Space1D() : Space1D(Mesh1D(), Space1DOptions{0, Continuity::discontinuous}) {}

  Space1D(Mesh1D mesh, Space1DOptions opt) : mesh_(std::move(mesh)), opt_(std::move(opt)) {
    const int k = opt_.degree;
    detail::require(k >= 0 && k <= 6, "Space1D: degree must lie in [0, 6]");
    const bool cont = opt_.continuity == Continuity::continuous;
    detail::require(!cont || k >= 1, "Space1D: continuous spaces need degree >= 1");
    detail::require(!cont || opt_.layout == NodeLayout::equispaced,
                    "Space1D: Gauss node layout is only available for discontinuous spaces");
    build_nodes();
    const int nc = mesh_.cells();
    std::vector<bool> is_break(nc + 1, false);
    for (double b : opt_.breaks) {
      const int i = mesh_.find_node(b);
      detail::require(i > 0 && i < nc, "Space1D: break point must be an interior mesh node");
      is_break[i] = true;
    }
    // Raw nodal numbering before constraints.
    std::vector<int> raw(static_cast<std::size_t>(nc) * (k + 1));
    int next = 0;
    for (int c = 0; c < nc; ++c) {
      for (int a = 0; a <= k; ++a) {
        const bool shared = cont && a == 0 && c > 0 && !is_break[c];
        raw[c * (k + 1) + a] = shared ? raw[(c - 1) * (k + 1) + k] : next++;
      }
    }
    if (opt_.periodic) {
      detail::require(cont, "Space1D: periodicity applies to continuous spaces");
      const int last = raw[(nc - 1) * (k + 1) + k];
      for (int& r : raw)
        if (r == last) r = raw[0];
      --next;
    }
    std::vector<bool> dropped(next, false);
    for (const PointConstraint& pc : opt_.zeros) {
      const int i = mesh_.find_node(pc.point);
      detail::require(i >= 0, "Space1D: constrained point must be a mesh node");
      detail::require(cont, "Space1D: point constraints apply to continuous spaces");
      if (pc.side <= 0 && i > 0) dropped[raw[(i - 1) * (k + 1) + k]] = true;
      if (pc.side >= 0 && i < nc) dropped[raw[i * (k + 1)]] = true;
      if (opt_.periodic && (i == 0 || i == nc)) dropped[raw[0]] = true;
    }
    std::vector<int> compress(next, -1);
    int n = 0;
    for (int r = 0; r < next; ++r)
      if (!dropped[r]) compress[r] = n++;
    ndofs_ = n;
    dofs_.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) dofs_[i] = compress[raw[i]];
  }

  /// One cell on [0, 1] carrying the constant function; the dummy y-factor of 1D problems.
  static Space1D unit() { return Space1D(); }

  const Mesh1D& mesh() const { return mesh_; }
  const Space1DOptions& options() const { return opt_; }
  int degree() const { return opt_.degree; }
  int local_size() const { return opt_.degree + 1; }
  int ndofs() const { return ndofs_; }
  bool continuous() const { return opt_.continuity == Continuity::continuous; }

  /// Global index of local node a on cell c, or -1 when constrained to zero.
  int dof(int c, int a) const { return dofs_[c * (opt_.degree + 1) + a]; }

  double node(int a) const { return nodes_[a]; }

  /// Lagrange shape function a on the reference cell.
  double shape(int a, double s) const {
    double v = 1.0;
    for (int b = 0; b <= opt_.degree; ++b)
      if (b != a) v *= (s - nodes_[b]) / (nodes_[a] - nodes_[b]);
    return v;
  }

  /// d/ds of the reference shape function.
  double dshape(int a, double s) const {
    double sum = 0.0;
    for (int b = 0; b <= opt_.degree; ++b) {
      if (b == a) continue;
      double term = 1.0 / (nodes_[a] - nodes_[b]);
      for (int c = 0; c <= opt_.degree; ++c)
        if (c != a && c != b) term *= (s - nodes_[c]) / (nodes_[a] - nodes_[c]);
      sum += term;
    }
    return sum;
  }

  std::string describe() const {
    std::string s = continuous() ? "H1-P" : "DG-P";
    s += std::to_string(opt_.degree);
    if (opt_.periodic) s += " periodic";
    if (!opt_.zeros.empty()) s += " constrained";
    if (opt_.layout == NodeLayout::gauss) s += " gauss-nodes";
    return s;
  }

 private:
  void build_nodes() {
    const int k = opt_.degree;
    nodes_.resize(k + 1);
    if (k == 0) {
      nodes_[0] = 0.5;
    } else if (opt_.layout == NodeLayout::gauss) {
      const LineRule& r = gauss_legendre(k + 1);
      for (int a = 0; a <= k; ++a) nodes_[a] = r.x[a];
    } else {
      for (int a = 0; a <= k; ++a) nodes_[a] = static_cast<double>(a) / k;
    }
  }

  Mesh1D mesh_;
  Space1DOptions opt_;
  std::vector<double> nodes_;
  std::vector<int> dofs_;
  int ndofs_ = 0;
};

/// Tensor-product scalar space Sx (x) Sy; global index ix * ny + iy.
class ScalarSpace {
 public:
  ScalarSpace() = default;
  ScalarSpace(Space1D sx, Space1D sy, std::string label = {})
      : sx_(std::move(sx)), sy_(std::move(sy)), label_(std::move(label)) {}

  const Space1D& x() const { return sx_; }
  const Space1D& y() const { return sy_; }
  int ndofs() const { return sx_.ndofs() * sy_.ndofs(); }
  int index(int ix, int iy) const { return ix * sy_.ndofs() + iy; }
  const std::string& label() const { return label_; }
  std::string describe() const {
    return (label_.empty() ? std::string() : label_ + ": ") + sx_.describe() + " x " +
           sy_.describe() + " (" + std::to_string(ndofs()) + " dofs)";
  }

 private:
  Space1D sx_;
  Space1D sy_;
  std::string label_;
};

/// One scalar unknown of the system, e.g. u, v_x, v_y or an intrinsic memory variable.
struct Slot {
  std::string name;
  ScalarSpace space;
  int offset = 0;
};

/// Ordered list of slots sharing one mesh; the global vector concatenates them.
class FieldSpace {
 public:
  FieldSpace() = default;
  explicit FieldSpace(Mesh mesh) : mesh_(std::move(mesh)) {}

  void add(std::string name, ScalarSpace space) {
    slots_.push_back(Slot{std::move(name), std::move(space), ndofs_});
    ndofs_ += slots_.back().space.ndofs();
  }

  const Mesh& mesh() const { return mesh_; }
  int ndofs() const { return ndofs_; }
  int slot_count() const { return static_cast<int>(slots_.size()); }
  const Slot& slot(int i) const { return slots_.at(i); }
  const std::vector<Slot>& slots() const { return slots_; }
  int find(const std::string& name) const {
    for (int i = 0; i < slot_count(); ++i)
      if (slots_[i].name == name) return i;
    return -1;
  }

 private:
  Mesh mesh_;
  std::vector<Slot> slots_;
  int ndofs_ = 0;
};

/// Spatial element family of a slot.
enum class Family { h1, h1_periodic, h1_constrained, rt_x, rt_y, dg };

/// Build a tensor scalar space on `mesh` for the given family.
///   h1            continuous P_k in every direction, zero trace on the boundary
///   h1_periodic   continuous periodic P_k (1D)
///   h1_constrained continuous P_k with explicit breaks and point zeros (1D)
///   rt_x, rt_y    the two components of the tensor Raviart-Thomas space RT_k
///   dg            discontinuous Q_k
inline ScalarSpace build_space(const Mesh& mesh, Family family, int degree,
                               const std::vector<double>& breaks = {},
                               const std::vector<PointConstraint>& zeros = {},
                               NodeLayout layout = NodeLayout::equispaced) {
  const bool two_d = mesh.dimension == 2;
  auto cont = [&](const Mesh1D& m, int k, bool bc) {
    Space1DOptions o{k, Continuity::continuous};
    if (bc) o.zeros = {{m.lo(), 1}, {m.hi(), -1}};
    return Space1D(m, o);
  };
  auto disc = [&](const Mesh1D& m, int k) {
    Space1DOptions o{k, Continuity::discontinuous};
    o.layout = layout;
    return Space1D(m, o);
  };
  switch (family) {
    case Family::h1:
      return ScalarSpace(cont(mesh.x, degree, true),
                         two_d ? cont(mesh.y, degree, true) : Space1D::unit(),
                         "H1_0-Q" + std::to_string(degree));
    case Family::h1_periodic: {
      detail::require(!two_d, "build_space: periodic family is one-dimensional");
      Space1DOptions o{degree, Continuity::continuous, true};
      return ScalarSpace(Space1D(mesh.x, o), Space1D::unit(), "H1#-P" + std::to_string(degree));
    }
    case Family::h1_constrained: {
      detail::require(!two_d, "build_space: constrained family is one-dimensional");
      Space1DOptions o{degree, Continuity::continuous, false, breaks, zeros};
      return ScalarSpace(Space1D(mesh.x, o), Space1D::unit(), "H1-P" + std::to_string(degree));
    }
    case Family::rt_x:
      detail::require(two_d, "build_space: Raviart-Thomas needs a 2D mesh");
      return ScalarSpace(cont(mesh.x, degree + 1, false), disc(mesh.y, degree),
                         "RT" + std::to_string(degree) + "-x");
    case Family::rt_y:
      detail::require(two_d, "build_space: Raviart-Thomas needs a 2D mesh");
      return ScalarSpace(disc(mesh.x, degree), cont(mesh.y, degree + 1, false),
                         "RT" + std::to_string(degree) + "-y");
    case Family::dg:
      return ScalarSpace(disc(mesh.x, degree), two_d ? disc(mesh.y, degree) : Space1D::unit(),
                         "DG-Q" + std::to_string(degree));
  }
  throw ValidationError("build_space: unsupported family");
}

}  // namespace evohom

#endif  // EVOHOM_SPACE_HPP
