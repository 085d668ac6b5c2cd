#ifndef EVOHOM_LAB_HPP
#define EVOHOM_LAB_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "analytic.hpp"
#include "assembly.hpp"
#include "error.hpp"
#include "homogenisation.hpp"
#include "material_law.hpp"
#include "mesh.hpp"
#include "solver.hpp"
#include "space.hpp"
#include "timecore.hpp"

namespace evohom {

// ---------------------------------------------------------------------------
// Space-time quadrature
// ---------------------------------------------------------------------------

/// Spatial quadrature points with weights (tensor Gauss on a rectangle partition).
struct PointSet {
  int dimension = 1;
  std::vector<Point> x;
  std::vector<double> w;
  int size() const { return static_cast<int>(x.size()); }
};

/// Tensor Gauss points on the cells of the partition given by sorted x-cuts and y-cuts.
/// For one-dimensional sets pass y_cuts = {0, 1}; points then carry y = 0.5.
inline PointSet tensor_points(const std::vector<double>& x_cuts, const std::vector<double>& y_cuts, int q,
                              int dimension) {
  PointSet ps;
  ps.dimension = dimension;
  const LineRule& r = gauss_legendre(q);
  const LineRule& ry = dimension == 1 ? gauss_legendre(1) : r;
  for (std::size_t i = 0; i + 1 < x_cuts.size(); ++i) {
    const double ax = x_cuts[i], bx = x_cuts[i + 1];
    for (std::size_t j = 0; j + 1 < y_cuts.size(); ++j) {
      const double ay = y_cuts[j], by = y_cuts[j + 1];
      for (int a = 0; a < r.size(); ++a)
        for (int b = 0; b < ry.size(); ++b) {
          ps.x.push_back({ax + (bx - ax) * r.x[a], ay + (by - ay) * ry.x[b], 0.0});
          ps.w.push_back((bx - ax) * r.w[a] * (by - ay) * ry.w[b]);
        }
    }
  }
  return ps;
}

/// Common refinement of the node sets of several 1D meshes.
inline std::vector<double> merge_cuts(const std::vector<const Mesh1D*>& meshes) {
  std::vector<double> all;
  for (const Mesh1D* m : meshes) all.insert(all.end(), m->nodes().begin(), m->nodes().end());
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (double v : all)
    if (out.empty() || v - out.back() > 1e-13 * std::max(1.0, std::abs(v))) out.push_back(v);
  return out;
}

/// Point set on the common refinement of the given meshes.
inline PointSet common_points(const std::vector<const Mesh*>& meshes, int q) {
  std::vector<const Mesh1D*> xs, ys;
  for (const Mesh* m : meshes) {
    xs.push_back(&m->x);
    ys.push_back(&m->y);
  }
  const int dim = meshes.front()->dimension;
  return tensor_points(merge_cuts(xs), dim == 1 ? std::vector<double>{0.0, 1.0} : merge_cuts(ys), q, dim);
}

/// Gauss nodes in time on every slab of a grid.
struct TimePoints {
  std::vector<double> t;
  std::vector<double> w;
};

inline TimePoints time_points(const TimeGrid& grid, int q = 4) {
  TimePoints tp;
  const LineRule& r = gauss_legendre(q);
  for (int m = 1; m <= grid.slabs(); ++m)
    for (int k = 0; k < r.size(); ++k) {
      tp.t.push_back(grid.start(m) + grid.length(m) * r.x[k]);
      tp.w.push_back(grid.length(m) * r.w[k]);
    }
  return tp;
}

// ---------------------------------------------------------------------------
// Samplers: uniform access to discrete and analytic space-time fields
// ---------------------------------------------------------------------------

/// Space-time field with `slots()` scalar components, bound to a point set.
class FieldSampler {
 public:
  virtual ~FieldSampler() = default;
  virtual int slots() const = 0;
  /// Values of `slot` at time t on every point of the bound point set.
  virtual Vector sample(int slot, double t) const = 0;
};

/// Discrete solution evaluated through sparse evaluation matrices.
class FemSampler : public FieldSampler {
 public:
  FemSampler(const FieldSpace& fs, std::shared_ptr<const EvolutionSolution> sol, const PointSet& ps,
             int slot_count = -1)
      : fs_(fs), sol_(std::move(sol)) {
    const int n = slot_count < 0 ? fs.slot_count() : slot_count;
    for (int s = 0; s < n; ++s) eval_.push_back(evaluation_matrix(fs.mesh(), fs.slot(s).space, ps.x));
  }
  int slots() const override { return static_cast<int>(eval_.size()); }
  Vector sample(int slot, double t) const override {
    const int m = sol_->grid.locate(t);
    const double s = (t - sol_->grid.start(m)) / sol_->grid.length(m);
    const Slot& sl = fs_.slot(slot);
    const Vector c = sol_->c0[m - 1].segment(sl.offset, sl.space.ndofs()) +
                     temporal_basis(1, s) * sol_->c1[m - 1].segment(sl.offset, sl.space.ndofs());
    return eval_[slot] * c;
  }

 private:
  FieldSpace fs_;
  std::shared_ptr<const EvolutionSolution> sol_;
  std::vector<SparseMatrix> eval_;
};

/// Field of the form  sum_k T_k(t) X_k(x)  per slot.
class SeparableSampler : public FieldSampler {
 public:
  struct Term {
    std::function<double(double)> time;
    std::function<double(const Point&)> space;
  };

  SeparableSampler(std::vector<std::vector<Term>> terms, const PointSet& ps) : terms_(std::move(terms)) {
    for (const auto& slot_terms : terms_) {
      std::vector<Vector> xs;
      for (const Term& term : slot_terms) {
        Vector v(ps.size());
        for (int p = 0; p < ps.size(); ++p) v(p) = term.space(ps.x[p]);
        xs.push_back(std::move(v));
      }
      space_.push_back(std::move(xs));
    }
    npts_ = ps.size();
  }
  int slots() const override { return static_cast<int>(terms_.size()); }
  Vector sample(int slot, double t) const override {
    Vector v = Vector::Zero(npts_);
    for (std::size_t k = 0; k < terms_[slot].size(); ++k) v += terms_[slot][k].time(t) * space_[slot][k];
    return v;
  }

 private:
  std::vector<std::vector<Term>> terms_;
  std::vector<std::vector<Vector>> space_;
  int npts_ = 0;
};

/// Pointwise selection between two samplers: points with mask 1 come from `second`.
class CompositeSampler : public FieldSampler {
 public:
  CompositeSampler(std::shared_ptr<const FieldSampler> first, std::shared_ptr<const FieldSampler> second,
                   std::vector<char> mask)
      : a_(std::move(first)), b_(std::move(second)), mask_(std::move(mask)) {}
  int slots() const override { return std::min(a_->slots(), b_->slots()); }
  Vector sample(int slot, double t) const override {
    Vector va = a_->sample(slot, t);
    const Vector vb = b_->sample(slot, t);
    for (int p = 0; p < va.size(); ++p)
      if (mask_[p]) va(p) = vb(p);
    return va;
  }

 private:
  std::shared_ptr<const FieldSampler> a_, b_;
  std::vector<char> mask_;
};

// ---------------------------------------------------------------------------
// Pairings and strong norms
// ---------------------------------------------------------------------------

/// Separable test function  sum over terms of T(t) X(x) e_slot.
struct TestFunction {
  struct Term {
    int slot = 0;
    std::function<double(const Point&)> space;
    std::function<double(double)> time = [](double) { return 1.0; };
  };
  std::string name;
  std::vector<Term> terms;
};

/// Request for the space-time L2 norm of the difference over some slots and a subdomain.
struct NormRequest {
  std::string name;
  std::vector<int> slots;
  std::function<bool(const Point&)> region = [](const Point&) { return true; };
};

/// Request for the unweighted space-time pairing <a - b, v> restricted to a subdomain.
struct PairingRequest {
  std::string name;
  TestFunction test;
  std::function<bool(const Point&)> region = [](const Point&) { return true; };
};

struct Measurement {
  std::string name;
  double value = 0.0;
};

/// One pass over the space-time quadrature computing |<a - b, v>| and ||a - b||.
/// A null `b` measures `a` itself.
inline std::vector<Measurement> measure(const FieldSampler& a, const FieldSampler* b, const PointSet& ps,
                                        const TimePoints& tp, const std::vector<PairingRequest>& pairings,
                                        const std::vector<NormRequest>& norms) {
  const int np = ps.size();
  const int slots = a.slots();
  // Spatial weights times test factors, precomputed per pairing term.
  std::vector<std::vector<Vector>> pw(pairings.size());
  for (std::size_t k = 0; k < pairings.size(); ++k)
    for (const auto& term : pairings[k].test.terms) {
      detail::require(term.slot >= 0 && term.slot < slots, "pairing: test function slot out of range");
      Vector v(np);
      for (int p = 0; p < np; ++p)
        v(p) = pairings[k].region(ps.x[p]) ? ps.w[p] * term.space(ps.x[p]) : 0.0;
      pw[k].push_back(std::move(v));
    }
  std::vector<Vector> nw(norms.size());
  for (std::size_t k = 0; k < norms.size(); ++k) {
    nw[k].resize(np);
    for (int p = 0; p < np; ++p) nw[k](p) = norms[k].region(ps.x[p]) ? ps.w[p] : 0.0;
    for (int s : norms[k].slots) detail::require(s >= 0 && s < slots, "strong norm: slot out of range");
  }
  std::vector<char> needed(slots, 0);
  for (const auto& pr : pairings)
    for (const auto& term : pr.test.terms) needed[term.slot] = 1;
  for (const auto& nr : norms)
    for (int s : nr.slots) needed[s] = 1;

  std::vector<double> psum(pairings.size(), 0.0), nsum(norms.size(), 0.0);
  std::vector<Vector> diff(slots);
  for (std::size_t q = 0; q < tp.t.size(); ++q) {
    const double t = tp.t[q];
    for (int s = 0; s < slots; ++s) {
      if (!needed[s]) continue;
      diff[s] = a.sample(s, t);
      if (b) diff[s] -= b->sample(s, t);
    }
    for (std::size_t k = 0; k < pairings.size(); ++k)
      for (std::size_t j = 0; j < pairings[k].test.terms.size(); ++j) {
        const auto& term = pairings[k].test.terms[j];
        psum[k] += tp.w[q] * term.time(t) * diff[term.slot].dot(pw[k][j]);
      }
    for (std::size_t k = 0; k < norms.size(); ++k)
      for (int s : norms[k].slots) nsum[k] += tp.w[q] * diff[s].cwiseProduct(diff[s]).dot(nw[k]);
  }
  std::vector<Measurement> out;
  for (std::size_t k = 0; k < pairings.size(); ++k) out.push_back({pairings[k].name, std::abs(psum[k])});
  for (std::size_t k = 0; k < norms.size(); ++k) out.push_back({norms[k].name, std::sqrt(nsum[k])});
  return out;
}

/// |<a - b, v>| over [0, T] x domain.
inline double pairing(const FieldSampler& a, const FieldSampler* b, const PointSet& ps, const TimePoints& tp,
                      const TestFunction& v) {
  return measure(a, b, ps, tp, {PairingRequest{v.name, v}}, {}).front().value;
}

/// ||a - b|| in L2 over [0, T] x subdomain for the listed slots.
inline double strong_norm_diff(const FieldSampler& a, const FieldSampler* b, const PointSet& ps,
                               const TimePoints& tp, const NormRequest& req) {
  return measure(a, b, ps, tp, {}, {req}).front().value;
}

/// Least-squares slope of log(value) against log(n).
inline double fit_rate(const std::vector<std::pair<double, double>>& points) {
  detail::require(points.size() >= 3, "fit_rate: need at least three points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [n, v] : points) {
    if (!(n > 0.0) || !(v > 0.0)) throw ValidationError("fit_rate: n and values must be positive");
    const double x = std::log(n), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(points.size());
  const double den = k * sxx - sx * sx;
  bool distinct = false;
  for (auto [n, v] : points) distinct = distinct || n != points.front().first;
  detail::require(distinct && den > 0.0, "fit_rate: need at least two distinct n");
  return (k * sxy - sx * sy) / den;
}

// ---------------------------------------------------------------------------
// Experiment registry
// ---------------------------------------------------------------------------

/// Parameters of one convergence experiment.
struct ExperimentSpec {
  ExampleId example = ExampleId::EX1;
  std::vector<int> n_list{1, 2, 4, 8, 16};
  int slabs = 64;
  double final_time = 2.0;
  double rho = 0.0;
  int degree = 0;      // H1 slots use P_{degree+1}, flux slots RT_degree
  int ref_n = 8;       // mesh rule index of the fine homogenised reference
  int ref_degree = 1;  // degree of the reference (used by EX2..EX5)
  bool nodal_quadrature = true;  // EX1 only: lumped (trapezoidal) M0, M1 and load
  MaterialConstants constants;
};

inline void validate(const ExperimentSpec& s) {
  if (s.example == ExampleId::MAXWELL)
    throw ValidationError("ExperimentSpec: MAXWELL has no discrete experiment (formula level only)");
  if (s.n_list.empty()) throw ValidationError("ExperimentSpec: n-list is empty");
  for (int n : s.n_list)
    if (n < 1) throw ValidationError("ExperimentSpec: every n must be at least 1");
  if (s.slabs < 1) throw ValidationError("ExperimentSpec: slab count must be at least 1");
  if (!(s.final_time > 0.0)) throw ValidationError("ExperimentSpec: final time must be positive");
  if (s.rho < 0.0) throw ValidationError("ExperimentSpec: rho must be nonnegative");
  if (s.degree < 0 || s.degree > 3 || s.ref_degree < 0 || s.ref_degree > 3)
    throw ValidationError("ExperimentSpec: degrees must lie in [0, 3]");
  if (s.ref_n < 1) throw ValidationError("ExperimentSpec: reference index must be at least 1");
  const MaterialConstants& k = s.constants;
  if (!(k.eps0 > 0 && k.mu0 > 0 && k.eps > 0 && k.mu > 0 && k.sigma > 0 && k.nu0 > 0))
    throw ValidationError("ExperimentSpec: material constants must be positive");
}

/// Oscillating law of example `id` at index n.
inline MaterialLaw sequence_law(ExampleId id, int n, const MaterialConstants& k = {}) {
  using CF = CoefficientField;
  const CF in = CF::omega1();
  const CF out = CF(1.0) - in;
  const CF o = CF::stripe(n);
  MaterialLaw law;
  law.name = to_string(id) + "-n" + std::to_string(n);
  switch (id) {
    case ExampleId::EX1:
      law.nu0 = 2.0;
      law.add_slot("u", {1.0, CF::sin_osc(n), {}});
      law.positivity = 1.0;
      law.bound = 2.0;
      return law;
    case ExampleId::EX2:
      law.nu0 = k.nu0;
      law.add_slot("u", {o, CF(1.0) - o, {}});
      law.add_slot("v", {1.0, 0.0, {}});
      law.positivity = std::min(1.0, k.nu0);
      law.bound = std::max(1.0, 1.0 / k.nu0);
      return law;
    case ExampleId::EX3:
      law.nu0 = 2.0;
      law.add_slot("u", {1.0, CF::sin_osc(n), {}});
      law.add_slot("v", {1.0, CF::sin_osc(n), {}});
      return law;
    case ExampleId::EX4:
      law.nu0 = k.nu0;
      law.add_slot("u", {in * (CF(1.0) - o) + CF(k.eps0) * out, in * o, {}});
      law.add_slot("vx", {in * (CF(1.0) + o) + CF(k.mu0) * out, 0.0, {}});
      law.add_slot("vy", {in * (CF(1.0) + o) + CF(k.mu0) * out, 0.0, {}});
      return law;
    case ExampleId::EX5:
      law.nu0 = k.nu0;
      law.add_slot("u", {in * (CF(1.0) + o) + CF(k.eps0) * out, 0.0, {}});
      law.add_slot("vx", {in * (CF(1.0) - o) + CF(k.mu0) * out, in * o, {}});
      law.add_slot("vy", {in * (CF(1.0) - o) + CF(k.mu0) * out, in * o, {}});
      return law;
    case ExampleId::MAXWELL: break;
  }
  throw ValidationError("sequence_law: no discrete law for " + to_string(id));
}

/// Mesh rule of an example at index n (EX1: 10n cells on (0,1); EX2: 20n; EX3: 40n on (-1,1);
/// EX4/EX5: graded 10n x 80 on (-2,2)^2).
inline Mesh example_mesh(ExampleId id, int n) {
  switch (id) {
    case ExampleId::EX1: return build_mesh({0.0, 1.0}, 10 * n, n);
    case ExampleId::EX2: return build_mesh({0.0, 1.0}, 20 * n, n);
    case ExampleId::EX3: return build_mesh({-1.0, 1.0}, 40 * n, n);
    case ExampleId::EX4:
    case ExampleId::EX5: return build_mesh({-2.0, 2.0}, {-2.0, 2.0}, 10 * n, 80, n, {-1.0, 1.0});
    case ExampleId::MAXWELL: break;
  }
  throw ValidationError("example_mesh: no mesh rule for " + to_string(id));
}

/// Spaces of the example's components at element degree k, plus the operator structure.
inline FieldSpace example_space(ExampleId id, const Mesh& mesh, int k) {
  FieldSpace fs(mesh);
  switch (id) {
    case ExampleId::EX1: {
      Space1DOptions o{k + 1, Continuity::continuous};
      fs.add("u", ScalarSpace(Space1D(mesh.x, o), Space1D::unit(), "H1-P" + std::to_string(k + 1)));
      return fs;
    }
    case ExampleId::EX2:
      fs.add("u", build_space(mesh, Family::h1_periodic, k + 1));
      fs.add("v", build_space(mesh, Family::h1_periodic, k + 1));
      return fs;
    case ExampleId::EX3:
      fs.add("u", build_space(mesh, Family::h1_constrained, k + 1, {0.0}, {{-1.0, 1}}));
      fs.add("v", build_space(mesh, Family::h1_constrained, k + 1, {0.0}, {{0.0, -1}}));
      return fs;
    case ExampleId::EX4:
    case ExampleId::EX5:
      fs.add("u", build_space(mesh, Family::h1, k + 1));
      fs.add("vx", build_space(mesh, Family::rt_x, k));
      fs.add("vy", build_space(mesh, Family::rt_y, k));
      return fs;
    case ExampleId::MAXWELL: break;
  }
  throw ValidationError("example_space: no spaces for " + to_string(id));
}

inline SkewStructure example_structure(ExampleId id) {
  switch (id) {
    case ExampleId::EX1: return SkewStructure::none;
    case ExampleId::EX2: return SkewStructure::periodic_derivative;
    case ExampleId::EX3: return SkewStructure::glued_derivative;
    default: return SkewStructure::div_grad;
  }
}

/// Right-hand side of an example: EX1 f = 1; EX2, EX3 F = (sin 2 pi t, x - 1/2);
/// EX4, EX5 F = (sin 2 pi t, 0).
inline std::vector<Forcing> example_forcing(ExampleId id) {
  const CoefficientField x = CoefficientField::coordinate(0);
  switch (id) {
    case ExampleId::EX1: return {Forcing{0, 1.0, TimeSignal::unit_step()}};
    case ExampleId::EX2:
    case ExampleId::EX3:
      return {Forcing{0, 1.0, TimeSignal::sine()}, Forcing{1, x - CoefficientField(0.5), TimeSignal::unit_step()}};
    default: return {Forcing{0, 1.0, TimeSignal::sine()}};
  }
}

/// Assemble a complete discrete problem for a law on the example's spaces.
/// Memory laws are augmented; each intrinsic slot lives in DG-Q_k.
inline EvolutionProblem make_problem(ExampleId id, const Mesh& mesh, int k, const MaterialLaw& law,
                                     const ExperimentSpec& spec) {
  EvolutionProblem p;
  FieldSpace fs = example_space(id, mesh, k);
  MaterialLaw used = law;
  if (law.has_memory()) {
    const AugmentedLaw aug = augment_memory(law);
    for (std::size_t e = 0; e < aug.coupled_slot.size(); ++e)
      fs.add(aug.law.slots[law.size() + e], build_space(mesh, Family::dg, k));
    used = aug.law;
  }
  p.space = fs;
  p.law = used;
  p.A = assemble_skew_operator(example_structure(id), fs);
  p.forcing = example_forcing(id);
  p.grid = TimeGrid::uniform(spec.final_time, spec.slabs);
  p.rho = spec.rho;
  p.nodal_quadrature = id == ExampleId::EX1 && spec.nodal_quadrature;
  return p;
}

/// Number of physical (non-intrinsic) slots of an example.
inline int physical_slots(ExampleId id) {
  switch (id) {
    case ExampleId::EX1: return 1;
    case ExampleId::EX2:
    case ExampleId::EX3: return 2;
    default: return 3;
  }
}

/// Pairing dictionary of an example.
inline std::vector<TestFunction> test_dictionary(ExampleId id) {
  using Fn = std::function<double(const Point&)>;
  const Fn one = [](const Point&) { return 1.0; };
  const Fn fx = [](const Point& p) { return p[0]; };
  const Fn fy = [](const Point& p) { return p[1]; };
  const Fn fx2 = [](const Point& p) { return p[0] * p[0]; };
  const Fn spx = [](const Point& p) { return std::sin(std::numbers::pi * p[0]); };
  const Fn spy = [](const Point& p) { return std::sin(std::numbers::pi * p[1]); };
  const auto tt = [](double t) { return t; };
  std::vector<TestFunction> d;
  if (id == ExampleId::EX4 || id == ExampleId::EX5) {
    d.push_back({"v_1", {{1, one}, {2, one}}});
    d.push_back({"v_(x,0)", {{1, fx}}});
    d.push_back({"v_(0,y)", {{2, fy}}});
    d.push_back({"v_(sinpix,0)", {{1, spx}}});
    d.push_back({"v_(0,sinpiy)", {{2, spy}}});
    return d;
  }
  const int comps = physical_slots(id);
  const char* names[] = {"u", "v"};
  for (int s = 0; s < comps; ++s) {
    const std::string c = names[s];
    d.push_back({c + "_1", {{s, one}}});
    d.push_back({c + "_x", {{s, fx}}});
    d.push_back({c + "_x2", {{s, fx2}}});
    d.push_back({c + "_sinpix", {{s, spx}}});
    d.push_back({c + "_t", {{s, one, tt}}});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string example;
  int n = 0;
  std::string quantity;
  double value = 0.0;
};

/// Rows (n, quantity, value); fitted slopes use n = 0 and the prefix "slope:".
struct ConvergenceReport {
  std::string example;
  std::vector<ReportRow> rows;

  void add(int n, const std::string& q, double v) { rows.push_back({example, n, q, v}); }

  double value(int n, const std::string& q) const {
    for (const ReportRow& r : rows)
      if (r.n == n && r.quantity == q) return r.value;
    throw ValidationError("report: no value for n = " + std::to_string(n) + ", quantity " + q);
  }

  std::vector<std::pair<double, double>> series(const std::string& q) const {
    std::vector<std::pair<double, double>> s;
    for (const ReportRow& r : rows)
      if (r.quantity == q && r.n > 0) s.emplace_back(r.n, r.value);
    return s;
  }
};

inline std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

inline void write_csv_header(std::ostream& os) { os << "example,n,quantity,value\n"; }

inline void write_csv_rows(std::ostream& os, const std::vector<ReportRow>& rows) {
  for (const ReportRow& r : rows) os << r.example << ',' << r.n << ',' << r.quantity << ',' << csv_number(r.value) << '\n';
}

// ---------------------------------------------------------------------------
// Convergence sweep
// ---------------------------------------------------------------------------

namespace detail {

struct RunResult {
  EvolutionProblem problem;
  std::shared_ptr<const EvolutionSolution> solution;
};

inline RunResult run(const EvolutionProblem& p) {
  RunResult r{p, nullptr};
  r.solution = std::make_shared<const EvolutionSolution>(solve_evolution(p));
  return r;
}

// Spatial quadrature order for products of the compared fields and test functions.
inline int pairing_points(int max_degree) { return std::max(3, max_degree + 2); }

inline std::vector<std::function<double(double)>> ex3_right_reference_time() {
  // (0, 1): u = int_0^t I0(t - s) sin(2 pi s) ds, v = (x - 1/2) int_0^t I0.
  return {[](double t) { return t <= 0.0 ? 0.0 : ode_hom_exact(t, TimeSignal::sine()); },
          [](double t) { return bessel_i0_integral(t); }};
}

// Caches a scalar time function at the quadrature nodes (analytic oracles are costly).
inline std::function<double(double)> memoise(std::function<double(double)> f) {
  auto cache = std::make_shared<std::map<double, double>>();
  return [f = std::move(f), cache](double t) {
    auto it = cache->find(t);
    if (it != cache->end()) return it->second;
    const double v = f(t);
    cache->emplace(t, v);
    return v;
  };
}

}  // namespace detail

/// Callback for progress lines (may be empty). Calls are serialised by the sweep.
using ProgressFn = std::function<void(const std::string&)>;

namespace detail {

// Reference run of an example (EX2..EX5): homogenised law, reference mesh index, raised degree.
inline std::unique_ptr<RunResult> reference_run(const ExperimentSpec& spec) {
  const ExampleId id = spec.example;
  if (id == ExampleId::EX1) return nullptr;
  MaterialLaw hom = build_limit_law(id, spec.constants);
  if (id == ExampleId::EX3) hom.series_support.reset();  // (0, 1) is replaced by the analytic solution
  const Mesh rm = example_mesh(id, spec.ref_n);
  return std::make_unique<RunResult>(run(make_problem(id, rm, spec.ref_degree, hom, spec)));
}

// All report rows of one sweep item.
inline std::vector<ReportRow> sweep_item(const ExperimentSpec& spec, const RunResult* ref, int n) {
  const ExampleId id = spec.example;
  std::vector<ReportRow> rows;
  auto add = [&](const std::string& q, double v) { rows.push_back({to_string(id), n, q, v}); };

  const Mesh mesh = example_mesh(id, n);
  const MaterialLaw law = sequence_law(id, n, spec.constants);
  const RunResult seq_run = run(make_problem(id, mesh, spec.degree, law, spec));
  const int phys = physical_slots(id);
  const int q = pairing_points(std::max(spec.degree, ref ? spec.ref_degree : 0) + 1);
  std::vector<const Mesh*> meshes{&mesh};
  if (ref) meshes.push_back(&ref->problem.space.mesh());
  const PointSet ps = common_points(meshes, q);
  const TimePoints tp = time_points(seq_run.problem.grid, 4);
  FemSampler seq(seq_run.problem.space, seq_run.solution, ps, phys);

  using Terms = std::vector<std::vector<SeparableSampler::Term>>;
  const auto one = [](const Point&) { return 1.0; };
  std::shared_ptr<const FieldSampler> refs;
  if (id == ExampleId::EX1) {
    refs = std::make_shared<SeparableSampler>(Terms{{{memoise([](double t) { return bessel_i0_integral(t); }), one}}},
                                              ps);
  } else {
    auto fem = std::make_shared<FemSampler>(ref->problem.space, ref->solution, ps, phys);
    if (id == ExampleId::EX3) {
      auto tf = ex3_right_reference_time();
      auto an = std::make_shared<SeparableSampler>(
          Terms{{{memoise(tf[0]), one}}, {{memoise(tf[1]), [](const Point& p) { return p[0] - 0.5; }}}}, ps);
      std::vector<char> mask(ps.size());
      for (int p = 0; p < ps.size(); ++p) mask[p] = ps.x[p][0] > 0.0;
      refs = std::make_shared<CompositeSampler>(fem, an, mask);
    } else {
      refs = fem;
    }
  }

  const std::vector<TestFunction> dict = test_dictionary(id);
  std::vector<PairingRequest> prs;
  for (const TestFunction& v : dict) prs.push_back({"pair_" + v.name, v});
  std::vector<NormRequest> nrs;
  const auto left = [](const Point& p) { return p[0] < 0.0; };
  const auto right = [](const Point& p) { return p[0] > 0.0; };
  switch (id) {
    case ExampleId::EX1: nrs.push_back({"strong_u", {0}}); break;
    case ExampleId::EX2:
      nrs.push_back({"strong_u", {0}});
      nrs.push_back({"strong_v", {1}});
      break;
    case ExampleId::EX3:
      for (const TestFunction& v : dict) {
        prs.push_back({"pair_left_" + v.name, v, left});
        prs.push_back({"pair_right_" + v.name, v, right});
      }
      nrs.push_back({"strong_left", {0, 1}, left});
      nrs.push_back({"strong_right", {0, 1}, right});
      nrs.push_back({"strong_u", {0}});
      nrs.push_back({"strong_v", {1}});
      break;
    default:
      nrs.push_back({"strong_u", {0}});
      nrs.push_back({"strong_v", {1, 2}});
      nrs.push_back({"strong_U", {0, 1, 2}});
      break;
  }
  for (const Measurement& m : measure(seq, refs.get(), ps, tp, prs, nrs)) add(m.name, m.value);

  // Discrete stability ratio ||U_n|| / ||F|| on the same quadrature.
  std::vector<int> all(phys);
  for (int s = 0; s < phys; ++s) all[s] = s;
  const double unorm = measure(seq, nullptr, ps, tp, {}, {{"U", all}}).front().value;
  double fsq = 0.0;
  for (const Forcing& f : seq_run.problem.forcing) {
    double xs = 0.0, ts = 0.0;
    for (int p = 0; p < ps.size(); ++p) xs += ps.w[p] * std::pow(f.shape(ps.x[p]), 2);
    for (std::size_t k = 0; k < tp.t.size(); ++k) ts += tp.w[k] * std::pow(f.signal(tp.t[k]), 2);
    fsq += xs * ts;
  }
  add("stability_ratio", unorm / std::sqrt(fsq));
  add("dofs", seq_run.problem.space.ndofs());
  return rows;
}

}  // namespace detail

/// Solve the sequence problem for every n of the experiment, compare with the reference
/// of the example and collect strong norms, pairings, stability ratios and slopes.
/// Items run on `threads` workers (0: hardware concurrency); rows reach `csv` in n-list order.
inline ConvergenceReport convergence_sweep(const ExperimentSpec& spec, const ProgressFn& progress = {},
                                           std::ostream* csv = nullptr, unsigned threads = 0) {
  validate(spec);
  const ExampleId id = spec.example;
  ConvergenceReport rep;
  rep.example = to_string(id);
  std::mutex io;
  auto say = [&](const std::string& s) {
    std::lock_guard<std::mutex> lock(io);
    if (progress) progress(s);
  };

  say("reference: " + to_string(id));
  const std::unique_ptr<detail::RunResult> ref = detail::reference_run(spec);

  const std::size_t items = spec.n_list.size();
  std::vector<std::vector<ReportRow>> done(items);
  std::vector<char> finished(items, 0);
  std::vector<std::exception_ptr> failures(items);
  std::size_t written = 0;
  std::atomic<std::size_t> next{0};
  // Single writer: whoever completes an item flushes every finished prefix item in order.
  auto publish = [&](std::size_t k, std::vector<ReportRow> rows) {
    std::lock_guard<std::mutex> lock(io);
    done[k] = std::move(rows);
    finished[k] = 1;
    while (written < items && finished[written]) {
      if (csv) write_csv_rows(*csv, done[written]);
      ++written;
    }
    if (csv) csv->flush();
  };
  auto worker = [&]() {
    for (std::size_t k = next++; k < items; k = next++) {
      const int n = spec.n_list[k];
      say("solve: " + to_string(id) + " n = " + std::to_string(n));
      try {
        publish(k, detail::sweep_item(spec, ref.get(), n));
      } catch (...) {
        failures[k] = std::current_exception();
        // The failing item still reaches the CSV as an error row so partial output stays readable.
        publish(k, {ReportRow{to_string(id), n, "error", std::numeric_limits<double>::quiet_NaN()}});
      }
    }
  };
  unsigned nt = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  nt = static_cast<unsigned>(std::min<std::size_t>(nt, items));
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  for (auto& rows : done) rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());

  // Slopes of every pairing and strong norm measured at three or more n.
  if (items >= 3) {
    std::vector<std::string> names;
    for (const ReportRow& r : rep.rows)
      if (r.n == spec.n_list.front() && (r.quantity.rfind("pair", 0) == 0 || r.quantity.rfind("strong", 0) == 0))
        names.push_back(r.quantity);
    const std::size_t first_row = rep.rows.size();
    for (const std::string& q : names) {
      const auto s = rep.series(q);
      bool positive = true;
      for (auto [n, v] : s) positive = positive && v > 0.0;
      if (positive) rep.add(0, "slope:" + q, fit_rate(s));
    }
    if (csv) {
      write_csv_rows(*csv, std::vector<ReportRow>(rep.rows.begin() + static_cast<long>(first_row), rep.rows.end()));
      csv->flush();
    }
  }
  return rep;
}

/// Solve a single sequence problem of the experiment's example at index n and report its rows.
inline ConvergenceReport single_run(const ExperimentSpec& spec, int n) {
  ExperimentSpec one = spec;
  one.n_list = {n};
  return convergence_sweep(one, {}, nullptr, 1);
}

// ---------------------------------------------------------------------------
// Pure-oracle pairings of the ODE family (no finite elements involved)
// ---------------------------------------------------------------------------

/// |<u_n - u_hom, v>| over [0, T] x (0, 1) for the unit step, by tensor Gauss quadrature
/// split at the zeros of sin(2 pi n x) and on 8 time panels (integrands are entire).
inline double oracle_pairing(int n, double T, const std::function<double(double, double)>& v, int q = 30) {
  detail::require(n >= 1 && T > 0.0, "oracle_pairing: need n >= 1 and T > 0");
  const LineRule& r = gauss_legendre(q);
  const int panels = 8;
  std::vector<double> tn, tw;
  for (int k = 0; k < panels; ++k)
    for (int j = 0; j < r.size(); ++j) {
      tn.push_back(T * (k + r.x[j]) / panels);
      tw.push_back(T / panels * r.w[j]);
    }
  std::vector<double> uh(tn.size());
  for (std::size_t i = 0; i < tn.size(); ++i) uh[i] = bessel_i0_integral(tn[i]);
  double sum = 0.0;
  const double piece = 0.5 / n;
  for (int k = 0; k < 2 * n; ++k) {
    for (int j = 0; j < r.size(); ++j) {
      const double x = piece * (k + r.x[j]);
      const double wx = piece * r.w[j];
      double inner = 0.0;
      for (std::size_t i = 0; i < tn.size(); ++i)
        inner += tw[i] * (ode_exact(n, tn[i], x) - uh[i]) * v(tn[i], x);
      sum += wx * inner;
    }
  }
  return std::abs(sum);
}

// ---------------------------------------------------------------------------
// Plain-text configuration: "key = value" lines mirroring ExperimentSpec
// ---------------------------------------------------------------------------

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const std::string& part : detail::split(s, ',')) {
    if (part.empty()) continue;
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(part, &used);
    } catch (const std::exception&) {
      throw ValidationError("expected an integer list, got '" + s + "'");
    }
    if (used != part.size()) throw ValidationError("expected an integer list, got '" + s + "'");
    out.push_back(v);
  }
  return out;
}

/// Apply one configuration key to a spec.
inline void apply_config_key(ExperimentSpec& spec, const std::string& key, const std::string& value) {
  auto real = [&]() { return detail::parse_real(value, "config key " + key); };
  auto integer = [&]() {
    const double v = real();
    if (v != std::floor(v)) throw ValidationError("config key " + key + ": expected an integer");
    return static_cast<int>(v);
  };
  if (key == "example") spec.example = parse_example(value);
  else if (key == "n_list" || key == "n-list") spec.n_list = parse_int_list(value);
  else if (key == "slabs") spec.slabs = integer();
  else if (key == "final_time") spec.final_time = real();
  else if (key == "rho") spec.rho = real();
  else if (key == "degree") spec.degree = integer();
  else if (key == "ref_n") spec.ref_n = integer();
  else if (key == "ref_degree") spec.ref_degree = integer();
  else if (key == "nodal_quadrature") spec.nodal_quadrature = real() != 0.0;
  else if (key == "eps0") spec.constants.eps0 = real();
  else if (key == "mu0") spec.constants.mu0 = real();
  else if (key == "eps") spec.constants.eps = real();
  else if (key == "mu") spec.constants.mu = real();
  else if (key == "sigma") spec.constants.sigma = real();
  else if (key == "nu0") spec.constants.nu0 = real();
  else throw ValidationError("unknown config key '" + key + "'");
}

inline ExperimentSpec parse_config(const std::string& text, ExperimentSpec spec = {}) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    apply_config_key(spec, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  validate(spec);
  return spec;
}

}  // namespace evohom

#endif  // EVOHOM_LAB_HPP
