#ifndef EVOHOM_MATERIAL_LAW_HPP
#define EVOHOM_MATERIAL_LAW_HPP

#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "analytic.hpp"
#include "coefficient.hpp"
#include "error.hpp"

namespace evohom {

using Complex = std::complex<double>;

/// Memory contribution z^{-1} * gain * support(x) / (a + b z) to a diagonal entry.
/// The support is expected to be an indicator (values 0 or 1).
struct MemoryTerm {
  double gain = 0.0;
  CoefficientField support = 1.0;
  double a = 1.0;
  double b = 1.0;
};

/// Diagonal entry M_0(x) + z^{-1} (M_1(x) + sum of memory terms).
struct LawEntry {
  CoefficientField m0 = 0.0;
  CoefficientField m1 = 0.0;
  std::vector<MemoryTerm> memory;
};

/// Symmetric off-diagonal entry between slots i and j.
struct Coupling {
  int i = 0;
  int j = 0;
  CoefficientField m0 = 0.0;
  CoefficientField m1 = 0.0;
};

/// Block-diagonal material law M(z) = M_0 + z^{-1} M_1 with optional memory terms.
struct MaterialLaw {
  std::string name;
  std::vector<std::string> slots;
  std::vector<LawEntry> entries;
  std::vector<Coupling> couplings;
  double nu0 = 0.0;
  std::optional<double> positivity;  // documented constant c in Re zM(z) >= c
  std::optional<double> bound;       // documented constant d in |M(z)| <= d
  // Indicator of the region where every diagonal entry is the non-rational
  // series law (1 - z^-2)^{1/2} instead of M_0 + z^{-1} M_1.
  std::optional<CoefficientField> series_support;

  int size() const { return static_cast<int>(entries.size()); }

  void add_slot(std::string slot, LawEntry entry) {
    slots.push_back(std::move(slot));
    entries.push_back(std::move(entry));
  }

  int find(const std::string& slot) const {
    for (int i = 0; i < size(); ++i)
      if (slots[i] == slot) return i;
    return -1;
  }

  bool has_memory() const {
    for (const LawEntry& e : entries)
      if (!e.memory.empty()) return true;
    return false;
  }

  /// Instantaneous parts at a point.
  Eigen::MatrixXd m0(const Point& p) const { return part(p, true); }
  Eigen::MatrixXd m1(const Point& p) const { return part(p, false); }

  /// Pointwise symbol M(z)(x); requires Re z > nu0.
  Eigen::MatrixXcd eval(Complex z, const Point& p) const {
    if (!(z.real() > nu0))
      throw ValidationError("material law '" + name + "': Re z = " + std::to_string(z.real()) +
                            " must exceed nu0 = " + std::to_string(nu0));
    const Complex zi = 1.0 / z;
    Eigen::MatrixXcd m = m0(p).cast<Complex>() + zi * m1(p).cast<Complex>();
    for (int i = 0; i < size(); ++i)
      for (const MemoryTerm& t : entries[i].memory)
        m(i, i) += zi * t.gain * t.support(p) / (t.a + t.b * z);
    if (series_support && (*series_support)(p) != 0.0) {
      const Complex s = series_material_law(z).value;
      m = Eigen::MatrixXcd::Identity(size(), size()) * s;
    }
    return m;
  }

 private:
  Eigen::MatrixXd part(const Point& p, bool zeroth) const {
    const int n = size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = zeroth ? entries[i].m0(p) : entries[i].m1(p);
    for (const Coupling& c : couplings) {
      const double v = zeroth ? c.m0(p) : c.m1(p);
      m(c.i, c.j) += v;
      m(c.j, c.i) += v;
    }
    return m;
  }
};

/// Pointwise material law evaluation at a set of points.
inline std::vector<Eigen::MatrixXcd> eval_material_law(const MaterialLaw& law, Complex z,
                                                       const std::vector<Point>& points) {
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(points.size());
  for (const Point& p : points) out.push_back(law.eval(z, p));
  return out;
}

/// Log-spaced real parts in (nu0, re_max] combined with `imag_count` imaginary offsets.
inline std::vector<Complex> default_z_grid(double nu0, double re_max = 10.0, int re_count = 16,
                                           int imag_count = 8) {
  detail::require(re_max > nu0, "default_z_grid: re_max must exceed nu0");
  const double lo = nu0 > 0.0 ? nu0 * (1.0 + 5e-3) : 1e-3;
  std::vector<Complex> grid;
  for (int i = 0; i < re_count; ++i) {
    const double re = re_count == 1 ? lo : lo * std::pow(re_max / lo, double(i) / (re_count - 1));
    for (int k = 0; k < imag_count; ++k) {
      const double im = k == 0 ? 0.0 : std::pow(2.0, k - 2);
      grid.emplace_back(re, im);
    }
  }
  return grid;
}

/// Minimum over the samples of the smallest eigenvalue of the Hermitian part of z M(z)(x).
inline double wellposedness_scan(const MaterialLaw& law, const std::vector<Complex>& z_grid,
                                 const std::vector<Point>& points) {
  double c = std::numeric_limits<double>::infinity();
  for (Complex z : z_grid) {
    for (const Point& p : points) {
      const Eigen::MatrixXcd zm = z * law.eval(z, p);
      const Eigen::MatrixXcd h = 0.5 * (zm + zm.adjoint());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
      c = std::min(c, es.eigenvalues().minCoeff());
    }
  }
  return c;
}

/// Largest sampled operator norm of M(z)(x).
inline double sampled_bound(const MaterialLaw& law, const std::vector<Complex>& z_grid,
                            const std::vector<Point>& points) {
  double d = 0.0;
  for (Complex z : z_grid)
    for (const Point& p : points) {
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(law.eval(z, p));
      d = std::max(d, svd.singularValues()(0));
    }
  return d;
}

/// Memory-free law on an extended slot list plus, for every extra slot, the slot it couples to.
struct AugmentedLaw {
  MaterialLaw law;
  std::vector<int> coupled_slot;
  double beta = 2.0;
};

/// Replace each memory term z^{-1} c s / (a + b z), c < 0, by an intrinsic slot w with
///   M0_ww = beta b s,  M1_ww = beta a s + (1 - s),  M1_vw = -sqrt(beta |c|) s.
/// Eliminating w from z M0 + M1 returns the original z M(z) for every z.
inline AugmentedLaw augment_memory(const MaterialLaw& law, double beta = 2.0) {
  detail::require(beta > 0.0, "augment_memory: beta must be positive");
  AugmentedLaw out;
  out.beta = beta;
  out.law = law;
  for (LawEntry& e : out.law.entries) e.memory.clear();
  for (int i = 0; i < law.size(); ++i) {
    int count = 0;
    for (const MemoryTerm& t : law.entries[i].memory) {
      if (!(t.a > 0.0 && t.b > 0.0) || !(t.gain < 0.0))
        throw ValidationError("augment_memory: slot '" + law.slots[i] +
                              "' has an unsupported memory shape (need gain < 0, a > 0, b > 0)");
      const CoefficientField& s = t.support;
      LawEntry w;
      w.m0 = CoefficientField(beta * t.b) * s;
      w.m1 = CoefficientField(beta * t.a) * s + (CoefficientField(1.0) - s);
      const int k = out.law.size();
      out.law.add_slot("w_" + law.slots[i] + (count ? std::to_string(count) : ""), std::move(w));
      out.law.couplings.push_back(
          Coupling{i, k, 0.0, CoefficientField(-std::sqrt(beta * -t.gain)) * s});
      out.coupled_slot.push_back(i);
      ++count;
    }
  }
  out.law.name = law.name + (out.coupled_slot.empty() ? "" : "+intrinsic");
  return out;
}

/// Schur complement of z M0 + M1 of an augmented law onto its first `keep` slots, divided by z.
inline Eigen::MatrixXcd eliminate_intrinsic(const MaterialLaw& augmented, int keep, Complex z,
                                            const Point& p) {
  const int n = augmented.size();
  const Eigen::MatrixXcd s = z * augmented.m0(p).cast<Complex>() + augmented.m1(p).cast<Complex>();
  const int e = n - keep;
  const Eigen::MatrixXcd a = s.topLeftCorner(keep, keep);
  if (e == 0) return a / z;
  const Eigen::MatrixXcd b = s.topRightCorner(keep, e);
  const Eigen::MatrixXcd c = s.bottomLeftCorner(e, keep);
  const Eigen::MatrixXcd d = s.bottomRightCorner(e, e);
  return (a - b * d.partialPivLu().solve(c)) / z;
}

// ---------------------------------------------------------------------------
// Plain-text law format, one directive per line ('#' starts a comment):
//   law <name>
//   nu0 <real>
//   slot <name> m0 <expr> ; m1 <expr> [; memory <gain> <a> <b> <support expr>]...
//   coupling <slot> <slot> m0 <expr> ; m1 <expr>
//   positivity <real>
//   bound <real>
//   series <support expr>
// Expressions use the CoefficientField grammar.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_real(const std::string& s, const std::string& ctx) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError(ctx + ": expected a number, got '" + s + "'");
  }
  if (trim(s.substr(used)) != "") throw ValidationError(ctx + ": trailing text after number '" + s + "'");
  return v;
}

// "keyword rest" -> (keyword, rest)
inline std::pair<std::string, std::string> head(const std::string& s) {
  const std::string t = trim(s);
  const auto sp = t.find_first_of(" \t");
  if (sp == std::string::npos) return {t, {}};
  return {t.substr(0, sp), trim(t.substr(sp + 1))};
}

}  // namespace detail

inline std::string law_to_text(const MaterialLaw& law) {
  std::ostringstream os;
  os << "law " << (law.name.empty() ? "unnamed" : law.name) << "\n";
  os << "nu0 " << detail::fmt17(law.nu0) << "\n";
  for (int i = 0; i < law.size(); ++i) {
    const LawEntry& e = law.entries[i];
    os << "slot " << law.slots[i] << " m0 " << e.m0.to_string() << " ; m1 " << e.m1.to_string();
    for (const MemoryTerm& t : e.memory)
      os << " ; memory " << detail::fmt17(t.gain) << " " << detail::fmt17(t.a) << " "
         << detail::fmt17(t.b) << " " << t.support.to_string();
    os << "\n";
  }
  for (const Coupling& c : law.couplings)
    os << "coupling " << law.slots[c.i] << " " << law.slots[c.j] << " m0 " << c.m0.to_string()
       << " ; m1 " << c.m1.to_string() << "\n";
  if (law.positivity) os << "positivity " << detail::fmt17(*law.positivity) << "\n";
  if (law.bound) os << "bound " << detail::fmt17(*law.bound) << "\n";
  if (law.series_support) os << "series " << law.series_support->to_string() << "\n";
  return os.str();
}

inline MaterialLaw law_from_text(const std::string& text) {
  MaterialLaw law;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto parts_of = [&](const std::string& body, const std::string& ctx, LawEntry* entry,
                      Coupling* coupling) {
    for (const std::string& piece : detail::split(body, ';')) {
      auto [key, rest] = detail::head(piece);
      if (key == "m0") {
        (entry ? entry->m0 : coupling->m0) = CoefficientField::parse(rest);
      } else if (key == "m1") {
        (entry ? entry->m1 : coupling->m1) = CoefficientField::parse(rest);
      } else if (key == "memory" && entry) {
        MemoryTerm t;
        auto [g, r1] = detail::head(rest);
        auto [a, r2] = detail::head(r1);
        auto [b, supp] = detail::head(r2);
        t.gain = detail::parse_real(g, ctx);
        t.a = detail::parse_real(a, ctx);
        t.b = detail::parse_real(b, ctx);
        t.support = CoefficientField::parse(supp);
        entry->memory.push_back(std::move(t));
      } else {
        throw ValidationError(ctx + ": unknown part '" + key + "'");
      }
    }
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string ctx = "law text line " + std::to_string(lineno);
    auto [key, rest] = detail::head(line);
    if (key == "law") {
      law.name = rest;
    } else if (key == "nu0") {
      law.nu0 = detail::parse_real(rest, ctx);
    } else if (key == "positivity") {
      law.positivity = detail::parse_real(rest, ctx);
    } else if (key == "bound") {
      law.bound = detail::parse_real(rest, ctx);
    } else if (key == "series") {
      law.series_support = CoefficientField::parse(rest);
    } else if (key == "slot") {
      auto [name, body] = detail::head(rest);
      if (name.empty() || law.find(name) >= 0) throw ValidationError(ctx + ": missing or duplicate slot name");
      LawEntry e;
      parts_of(body, ctx, &e, nullptr);
      law.add_slot(name, std::move(e));
    } else if (key == "coupling") {
      auto [a, r1] = detail::head(rest);
      auto [b, body] = detail::head(r1);
      Coupling c;
      c.i = law.find(a);
      c.j = law.find(b);
      if (c.i < 0 || c.j < 0 || c.i == c.j)
        throw ValidationError(ctx + ": coupling must name two distinct declared slots");
      parts_of(body, ctx, nullptr, &c);
      law.couplings.push_back(std::move(c));
    } else {
      throw ValidationError(ctx + ": unknown directive '" + key + "'");
    }
  }
  if (law.size() == 0) throw ValidationError("law text: no slots declared");
  return law;
}

}  // namespace evohom

#endif  // EVOHOM_MATERIAL_LAW_HPP
