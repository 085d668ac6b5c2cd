#ifndef EVOHOM_COEFFICIENT_HPP
#define EVOHOM_COEFFICIENT_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"

namespace evohom {

/// Spatial point; unused trailing coordinates are ignored by the fields.
using Point = std::array<double, 3>;

/// Closed interval used for interval-arithmetic range bounds.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Axis-aligned box; axes beyond `dim` are unconstrained.
struct Box {
  int dim = 0;
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
};

/// Immutable scalar coefficient x -> c(x) stored as an expression tree.
class CoefficientField {
 public:
  enum class Kind { constant, coordinate, sin_osc, stripe, region, neg, add, sub, mul, div };

  CoefficientField() : CoefficientField(constant(0.0)) {}
  CoefficientField(double c) : CoefficientField(constant(c)) {}  // NOLINT: implicit by design

  static CoefficientField constant(double c) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::constant;
    n->value = c;
    return CoefficientField(std::move(n));
  }
  /// The coordinate function x (axis 0), y (axis 1) or z (axis 2).
  static CoefficientField coordinate(int axis) {
    detail::require(axis >= 0 && axis < 3, "coordinate: axis must be 0, 1 or 2");
    auto n = std::make_shared<Node>();
    n->kind = Kind::coordinate;
    n->axis = axis;
    return CoefficientField(std::move(n));
  }
  /// sin(2 pi n x).
  static CoefficientField sin_osc(int n) {
    detail::require(n >= 1, "sin_osc: n must be at least 1");
    auto p = std::make_shared<Node>();
    p->kind = Kind::sin_osc;
    p->n = n;
    return CoefficientField(std::move(p));
  }
  /// Indicator of O_n, the union of the intervals (k/n, (k + 1/2)/n), as a function of x.
  static CoefficientField stripe(int n) {
    detail::require(n >= 1, "stripe: n must be at least 1");
    auto p = std::make_shared<Node>();
    p->kind = Kind::stripe;
    p->n = n;
    return CoefficientField(std::move(p));
  }
  /// Indicator of an open box.
  static CoefficientField region(const Box& box) {
    detail::require(box.dim >= 1 && box.dim <= 3, "region: box dimension must be 1, 2 or 3");
    for (int d = 0; d < box.dim; ++d)
      detail::require(box.lo[d] < box.hi[d], "region: empty box");
    auto p = std::make_shared<Node>();
    p->kind = Kind::region;
    p->box = box;
    return CoefficientField(std::move(p));
  }
  /// Indicator of (-1, 1)^3; restricted to the plane or line it is (-1, 1)^d.
  static CoefficientField omega1() {
    return region(Box{3, {-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}});
  }

  Kind kind() const { return node_->kind; }

  double operator()(const Point& p) const { return eval(*node_, p); }
  double operator()(double x, double y = 0.0, double z = 0.0) const {
    return eval(*node_, Point{x, y, z});
  }

  bool is_constant() const { return !depends_on(0) && !depends_on(1) && !depends_on(2); }
  bool depends_on(int axis) const { return depends(*node_, axis); }

  /// True when c(x + L e_0) = c(x) for all x and c does not depend on y or z.
  bool has_period(double L) const {
    return !depends_on(1) && !depends_on(2) && periodic(*node_, L);
  }

  /// Discontinuity locations along `axis` inside the open interval (lo, hi), sorted.
  std::vector<double> breakpoints(int axis, double lo, double hi) const {
    std::vector<double> out;
    collect_breaks(*node_, axis, lo, hi, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-14; }),
              out.end());
    return out;
  }

  /// Enclosure of the values over a box (interval arithmetic, may overestimate).
  Range range(const Box& box) const { return range_of(*node_, box); }

  /// Upper bound of |c| over the box.
  double sup_bound(const Box& box) const {
    const Range r = range(box);
    return std::max(std::abs(r.lo), std::abs(r.hi));
  }

  /// Text form accepted by parse(); numbers printed with 17 significant digits.
  std::string to_string() const { return print(*node_); }

  static CoefficientField parse(const std::string& text);

  friend CoefficientField operator+(const CoefficientField& a, const CoefficientField& b) {
    return binary(Kind::add, a, b);
  }
  friend CoefficientField operator-(const CoefficientField& a, const CoefficientField& b) {
    return binary(Kind::sub, a, b);
  }
  friend CoefficientField operator*(const CoefficientField& a, const CoefficientField& b) {
    return binary(Kind::mul, a, b);
  }
  friend CoefficientField operator/(const CoefficientField& a, const CoefficientField& b) {
    return binary(Kind::div, a, b);
  }
  friend CoefficientField operator-(const CoefficientField& a) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::neg;
    n->lhs = a.node_;
    return CoefficientField(std::move(n));
  }

 private:
  struct Node {
    Kind kind = Kind::constant;
    double value = 0.0;
    int axis = 0;
    int n = 1;
    Box box{};
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  explicit CoefficientField(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static CoefficientField binary(Kind k, const CoefficientField& a, const CoefficientField& b) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->lhs = a.node_;
    n->rhs = b.node_;
    return CoefficientField(std::move(n));
  }

  static double eval(const Node& n, const Point& p) {
    switch (n.kind) {
      case Kind::constant: return n.value;
      case Kind::coordinate: return p[n.axis];
      case Kind::sin_osc: return std::sin(2.0 * std::numbers::pi * n.n * p[0]);
      case Kind::stripe: {
        const double s = n.n * p[0];
        const double frac = s - std::floor(s);
        return (frac > 0.0 && frac < 0.5) ? 1.0 : 0.0;
      }
      case Kind::region:
        for (int d = 0; d < n.box.dim; ++d)
          if (!(p[d] > n.box.lo[d] && p[d] < n.box.hi[d])) return 0.0;
        return 1.0;
      case Kind::neg: return -eval(*n.lhs, p);
      case Kind::add: return eval(*n.lhs, p) + eval(*n.rhs, p);
      case Kind::sub: return eval(*n.lhs, p) - eval(*n.rhs, p);
      case Kind::mul: return eval(*n.lhs, p) * eval(*n.rhs, p);
      case Kind::div: return eval(*n.lhs, p) / eval(*n.rhs, p);
    }
    return 0.0;
  }

  static bool depends(const Node& n, int axis) {
    switch (n.kind) {
      case Kind::constant: return false;
      case Kind::coordinate: return n.axis == axis;
      case Kind::sin_osc:
      case Kind::stripe: return axis == 0;
      case Kind::region: return axis < n.box.dim;
      case Kind::neg: return depends(*n.lhs, axis);
      default: return depends(*n.lhs, axis) || depends(*n.rhs, axis);
    }
  }

  static bool periodic(const Node& n, double L) {
    auto integer = [](double v) { return std::abs(v - std::round(v)) < 1e-12 * std::max(1.0, v); };
    switch (n.kind) {
      case Kind::constant: return true;
      case Kind::coordinate: return n.axis != 0;
      case Kind::sin_osc:
      case Kind::stripe: return integer(n.n * L);
      case Kind::region: return n.box.dim == 0;
      case Kind::neg: return periodic(*n.lhs, L);
      default: return periodic(*n.lhs, L) && periodic(*n.rhs, L);
    }
  }

  static void collect_breaks(const Node& n, int axis, double lo, double hi,
                             std::vector<double>& out) {
    switch (n.kind) {
      case Kind::stripe:
        if (axis == 0) {
          const double step = 0.5 / n.n;
          for (long k = static_cast<long>(std::floor(lo / step)); k * step < hi; ++k) {
            const double b = k * step;
            if (b > lo && b < hi) out.push_back(b);
          }
        }
        return;
      case Kind::region:
        if (axis < n.box.dim) {
          for (double b : {n.box.lo[axis], n.box.hi[axis]})
            if (b > lo && b < hi) out.push_back(b);
        }
        return;
      case Kind::neg: collect_breaks(*n.lhs, axis, lo, hi, out); return;
      case Kind::add:
      case Kind::sub:
      case Kind::mul:
      case Kind::div:
        collect_breaks(*n.lhs, axis, lo, hi, out);
        collect_breaks(*n.rhs, axis, lo, hi, out);
        return;
      default: return;
    }
  }

  static Range range_of(const Node& n, const Box& box) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (n.kind) {
      case Kind::constant: return {n.value, n.value};
      case Kind::coordinate:
        if (n.axis < box.dim) return {box.lo[n.axis], box.hi[n.axis]};
        return {-inf, inf};
      case Kind::sin_osc: return {-1.0, 1.0};
      case Kind::stripe:
      case Kind::region: return {0.0, 1.0};
      case Kind::neg: {
        const Range a = range_of(*n.lhs, box);
        return {-a.hi, -a.lo};
      }
      case Kind::add: {
        const Range a = range_of(*n.lhs, box), b = range_of(*n.rhs, box);
        return {a.lo + b.lo, a.hi + b.hi};
      }
      case Kind::sub: {
        const Range a = range_of(*n.lhs, box), b = range_of(*n.rhs, box);
        return {a.lo - b.hi, a.hi - b.lo};
      }
      case Kind::mul: {
        const Range a = range_of(*n.lhs, box), b = range_of(*n.rhs, box);
        const double c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
        return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
      }
      case Kind::div: {
        const Range a = range_of(*n.lhs, box), b = range_of(*n.rhs, box);
        if (b.lo <= 0.0 && b.hi >= 0.0) return {-inf, inf};
        const double c[4] = {a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi};
        return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
      }
    }
    return {-inf, inf};
  }

  static std::string number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  static std::string print(const Node& n) {
    switch (n.kind) {
      case Kind::constant:
        return n.value < 0.0 ? "(" + number(n.value) + ")" : number(n.value);
      case Kind::coordinate: return std::string(1, "xyz"[n.axis]);
      case Kind::sin_osc: return "sin_osc(" + std::to_string(n.n) + ")";
      case Kind::stripe: return "stripe(" + std::to_string(n.n) + ")";
      case Kind::region: {
        std::string s = "region(";
        for (int d = 0; d < n.box.dim; ++d) {
          if (d) s += ", ";
          s += number(n.box.lo[d]) + ", " + number(n.box.hi[d]);
        }
        return s + ")";
      }
      case Kind::neg: return "(-" + print(*n.lhs) + ")";
      case Kind::add: return "(" + print(*n.lhs) + " + " + print(*n.rhs) + ")";
      case Kind::sub: return "(" + print(*n.lhs) + " - " + print(*n.rhs) + ")";
      case Kind::mul: return "(" + print(*n.lhs) + " * " + print(*n.rhs) + ")";
      case Kind::div: return "(" + print(*n.lhs) + " / " + print(*n.rhs) + ")";
    }
    return "";
  }

  std::shared_ptr<const Node> node_;
};

namespace detail {

// Recursive-descent parser for the coefficient grammar:
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := number | '-' factor | '(' expr ')' | x | y | z
//           | sin_osc(int) | stripe(int) | region(omega1) | region(lo, hi, ...)
class CoefficientParser {
 public:
  explicit CoefficientParser(const std::string& s) : s_(s) {}

  CoefficientField parse_all() {
    CoefficientField e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("coefficient parse error at offset " + std::to_string(pos_) + ": " +
                          what + " in \"" + s_ + "\"");
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  std::string identifier() {
    skip();
    const std::size_t b = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    return s_.substr(b, pos_ - b);
  }
  double number() {
    skip();
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }
  int integer() {
    const double v = number();
    if (v != std::floor(v) || v < 1) fail("expected a positive integer");
    return static_cast<int>(v);
  }

  CoefficientField expr() {
    CoefficientField e = term();
    for (;;) {
      if (accept('+')) e = e + term();
      else if (accept('-')) e = e - term();
      else return e;
    }
  }
  CoefficientField term() {
    CoefficientField e = factor();
    for (;;) {
      if (accept('*')) e = e * factor();
      else if (accept('/')) e = e / factor();
      else return e;
    }
  }
  CoefficientField factor() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '-') {
      ++pos_;
      skip();
      // A literal negative number stays a constant so printing round-trips.
      if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
        return CoefficientField::constant(-number());
      return -factor();
    }
    if (c == '(') {
      ++pos_;
      CoefficientField e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return CoefficientField::constant(number());
    const std::string id = identifier();
    if (id == "x") return CoefficientField::coordinate(0);
    if (id == "y") return CoefficientField::coordinate(1);
    if (id == "z") return CoefficientField::coordinate(2);
    if (id == "sin_osc" || id == "stripe") {
      expect('(');
      const int n = integer();
      expect(')');
      return id == "sin_osc" ? CoefficientField::sin_osc(n) : CoefficientField::stripe(n);
    }
    if (id == "region") {
      expect('(');
      skip();
      if (s_.compare(pos_, 6, "omega1") == 0) {
        pos_ += 6;
        expect(')');
        return CoefficientField::omega1();
      }
      Box box;
      do {
        if (box.dim == 3) fail("region takes at most three intervals");
        box.lo[box.dim] = number();
        expect(',');
        box.hi[box.dim] = number();
        ++box.dim;
      } while (accept(','));
      expect(')');
      return CoefficientField::region(box);
    }
    fail(id.empty() ? "unexpected character" : "unknown identifier '" + id + "'");
  }

  std::string s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline CoefficientField CoefficientField::parse(const std::string& text) {
  return detail::CoefficientParser(text).parse_all();
}

}  // namespace evohom

#endif  // EVOHOM_COEFFICIENT_HPP
