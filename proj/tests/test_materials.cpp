#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "evohom/homogenisation.hpp"
#include "evohom/lab.hpp"
#include "evohom/material_law.hpp"

using namespace evohom;
using CF = CoefficientField;

namespace {

std::vector<Point> line_points(double lo, double hi, int count) {
  std::vector<Point> p;
  for (int i = 0; i < count; ++i) p.push_back({lo + (hi - lo) * (i + 0.5) / count, 0.0, 0.0});
  return p;
}

std::vector<Point> plane_points(int count) {
  std::vector<Point> p;
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < count; ++j)
      p.push_back({-2.0 + 4.0 * (i + 0.5) / count, -2.0 + 4.0 * (j + 0.5) / count, 0.0});
  return p;
}

double max_rel_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(CoefficientField, StripeIsSelfSimilar) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> ux(-3.0, 3.0);
  const CF s1 = CF::stripe(1);
  for (int n : {1, 2, 3, 8, 64}) {
    const CF sn = CF::stripe(n);
    for (int i = 0; i < 500; ++i) {
      const double x = ux(rng);
      EXPECT_EQ(sn(x), s1(n * x)) << "n = " << n << ", x = " << x;
    }
  }
}

TEST(CoefficientField, StripeAndSineValues) {
  EXPECT_EQ(CF::stripe(1)(0.25), 1.0);
  EXPECT_EQ(CF::stripe(1)(0.75), 0.0);
  EXPECT_EQ(CF::stripe(2)(0.1), 1.0);
  EXPECT_EQ(CF::stripe(2)(0.3), 0.0);
  EXPECT_NEAR(CF::sin_osc(3)(1.0 / 12.0), 1.0, 1e-15);
  EXPECT_EQ(CF::omega1()(0.5, -0.5), 1.0);
  EXPECT_EQ(CF::omega1()(1.5, 0.0), 0.0);
}

TEST(CoefficientField, TextRoundTripPreservesValues) {
  const std::vector<CF> fields = {
      CF(1.0) + CF::sin_osc(4),
      CF::omega1() * (CF(1.0) - CF::stripe(3)) + CF(0.25) * (CF(1.0) - CF::omega1()),
      CF(1.0) / (CF(1.0) + CF::stripe(1)),
      -CF::coordinate(0) * CF::coordinate(1) + CF(-0.1),
      CF::region(Box{2, {-0.5, 0.0, 0.0}, {0.5, 1.0, 0.0}}),
  };
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const CF& f : fields) {
    const std::string text = f.to_string();
    const CF g = CF::parse(text);
    EXPECT_EQ(g.to_string(), text);
    for (int i = 0; i < 100; ++i) {
      const Point p{u(rng), u(rng), 0.0};
      EXPECT_EQ(f(p), g(p)) << text;
    }
  }
}

TEST(CoefficientField, ParseRejectsMalformedText) {
  EXPECT_THROW(CF::parse("1 +"), ValidationError);
  EXPECT_THROW(CF::parse("stripe(0)"), ValidationError);
  EXPECT_THROW(CF::parse("foo(1)"), ValidationError);
  EXPECT_THROW(CF::parse("(x"), ValidationError);
}

TEST(CoefficientField, SupBoundDominatesSamples) {
  const Box box{2, {-2.0, -2.0, 0.0}, {2.0, 2.0, 0.0}};
  const std::vector<CF> fields = {CF(1.0) + CF::sin_osc(7), CF::omega1() * CF::stripe(5) * CF(3.0),
                                  CF(2.0) - CF::coordinate(0) * CF::sin_osc(2)};
  for (const CF& f : fields) {
    const double bound = f.sup_bound(box);
    ASSERT_TRUE(std::isfinite(bound));
    for (const Point& p : plane_points(40)) EXPECT_LE(std::abs(f(p)), bound + 1e-14) << f.to_string();
  }
}

TEST(MaterialLaw, Ex1EvaluatesInstantFormula) {
  // The formula is checked at z = 2, the boundary of the admissible half-plane,
  // so the abscissa metadata is relaxed for this evaluation only.
  MaterialLaw law = sequence_law(ExampleId::EX1, 3);
  law.nu0 = 1.0;
  // sin(2 pi 3 x) = 1 at x = 1/12.
  const auto m = eval_material_law(law, 2.0, {{1.0 / 12.0, 0.0, 0.0}});
  EXPECT_NEAR(std::abs(m[0](0, 0) - Complex(1.5)), 0.0, 1e-15);
}

TEST(MaterialLaw, Ex5LimitMemoryEntry) {
  const MaterialLaw law = build_limit_law(ExampleId::EX5);
  const int vy = law.find("vy");
  ASSERT_GE(vy, 0);
  EXPECT_NEAR(std::abs(law.eval(1.0, {0.2, 0.3, 0.0})(vy, vy) - Complex(1.0)), 0.0, 1e-15);
  // The same entry written out: z^{-1} (2 - 2 (1 + z)^{-1}).
  const Complex z(1.7, 0.9);
  const Complex expect = (2.0 - 2.0 / (1.0 + z)) / z;
  EXPECT_NEAR(std::abs(law.eval(z, {0.2, 0.3, 0.0})(vy, vy) - expect), 0.0, 1e-15);
}

TEST(MaterialLaw, MaxwellFirstEntryAtUnitConstants) {
  const MaterialLaw law = build_limit_law(ExampleId::MAXWELL);
  EXPECT_NEAR(std::abs(law.eval(1.0, {0.0, 0.0, 0.0})(0, 0) - Complex(1.0)), 0.0, 1e-15);
}

TEST(MaterialLaw, RejectsAbscissaAtOrBelowNu0) {
  const MaterialLaw law = sequence_law(ExampleId::EX1, 1);
  EXPECT_THROW(law.eval(2.0, {0.1, 0.0, 0.0}), ValidationError);
  EXPECT_THROW(law.eval(Complex(1.0, 5.0), {0.1, 0.0, 0.0}), ValidationError);
  EXPECT_NO_THROW(law.eval(2.0001, {0.1, 0.0, 0.0}));
}

TEST(Wellposedness, Ex1ConstantIsAtLeastOne) {
  const MaterialLaw law = sequence_law(ExampleId::EX1, 4);
  std::vector<Complex> grid;
  for (Complex z : default_z_grid(2.0, 10.0))
    if (z.real() >= 2.01) grid.push_back(z);
  EXPECT_GE(wellposedness_scan(law, grid, line_points(0.0, 1.0, 64)), 1.0);
}

TEST(Wellposedness, Ex2ConstantIsMinOfOneAndNu0) {
  MaterialConstants k;
  k.nu0 = 0.5;
  const MaterialLaw law = sequence_law(ExampleId::EX2, 4, k);
  EXPECT_GE(wellposedness_scan(law, default_z_grid(0.5), line_points(0.0, 1.0, 64)), 0.5);
}

TEST(Wellposedness, IdentityLawReturnsLeftmostAbscissa) {
  MaterialLaw law;
  law.nu0 = 0.3;
  law.add_slot("u", {1.0, 0.0, {}});
  const auto grid = default_z_grid(0.3);
  double lo = 1e300;
  for (Complex z : grid) lo = std::min(lo, z.real());
  EXPECT_NEAR(wellposedness_scan(law, grid, line_points(0.0, 1.0, 4)), lo, 1e-15);
}

TEST(Wellposedness, SampledNormStaysBelowDeclaredBound) {
  MaterialConstants k;
  k.nu0 = 0.5;
  for (const MaterialLaw& law : {sequence_law(ExampleId::EX1, 3), sequence_law(ExampleId::EX2, 3, k)}) {
    ASSERT_TRUE(law.bound.has_value());
    const auto grid = default_z_grid(law.nu0);
    EXPECT_LE(sampled_bound(law, grid, line_points(0.0, 1.0, 48)), *law.bound) << law.name;
  }
}

TEST(AugmentMemory, Ex5HatMatrices) {
  const AugmentedLaw aug = augment_memory(build_limit_law(ExampleId::EX5));
  ASSERT_EQ(aug.law.size(), 4);
  ASSERT_EQ(aug.coupled_slot.size(), 1u);
  EXPECT_EQ(aug.coupled_slot[0], 2);
  EXPECT_FALSE(aug.law.has_memory());
  const Point in{0.3, -0.4, 0.0}, out{1.5, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(aug.law.m0(in)(3, 3), 2.0);
  EXPECT_DOUBLE_EQ(aug.law.m1(in)(2, 3), -2.0);
  EXPECT_DOUBLE_EQ(aug.law.m1(in)(3, 2), -2.0);
  EXPECT_DOUBLE_EQ(aug.law.m0(out)(3, 3), 0.0);
  EXPECT_DOUBLE_EQ(aug.law.m1(out)(2, 3), 0.0);
  const MaterialLaw orig = build_limit_law(ExampleId::EX5);
  for (const Point& p : {in, out})
    EXPECT_LE(max_rel_diff(eliminate_intrinsic(aug.law, 3, 3.0, p), orig.eval(3.0, p)), 1e-12);
}

TEST(AugmentMemory, MaxwellEliminationIdentity) {
  const MaterialLaw orig = build_limit_law(ExampleId::MAXWELL);
  const AugmentedLaw aug = augment_memory(orig);
  EXPECT_EQ(aug.law.size(), orig.size() + 1);
  for (const Point& p : {Point{0.2, 0.1, -0.5}, Point{1.5, 0.0, 0.0}})
    EXPECT_LE(max_rel_diff(eliminate_intrinsic(aug.law, orig.size(), 2.0, p), orig.eval(2.0, p)), 1e-12);
}

TEST(AugmentMemory, MemoryFreeLawIsUnchanged) {
  const MaterialLaw orig = sequence_law(ExampleId::EX4, 2);
  const AugmentedLaw aug = augment_memory(orig);
  EXPECT_TRUE(aug.coupled_slot.empty());
  EXPECT_EQ(law_to_text(aug.law), law_to_text(orig));
}

TEST(AugmentMemory, EliminationIdentityAtRandomAbscissae) {
  MaterialConstants k;
  k.eps = 0.7;
  k.sigma = 1.3;
  std::mt19937 rng(17);
  for (const MaterialLaw& orig : {build_limit_law(ExampleId::EX5, k), build_limit_law(ExampleId::MAXWELL, k)}) {
    const AugmentedLaw aug = augment_memory(orig);
    std::uniform_real_distribution<double> re(orig.nu0, orig.nu0 + 10.0), im(-10.0, 10.0);
    for (int i = 0; i < 20; ++i) {
      const Complex z(re(rng), im(rng));
      for (const Point& p : {Point{0.1, 0.2, 0.3}, Point{-1.5, 0.5, 0.0}})
        EXPECT_LE(max_rel_diff(eliminate_intrinsic(aug.law, orig.size(), z, p), orig.eval(z, p)), 1e-12)
            << orig.name << " z = " << z;
    }
  }
}

TEST(AugmentMemory, RejectsUnsupportedShape) {
  MaterialLaw law;
  law.add_slot("u", {1.0, 0.0, {MemoryTerm{1.0, 1.0, 1.0, 1.0}}});
  EXPECT_THROW(augment_memory(law), ValidationError);
  law.entries[0].memory[0].gain = -1.0;
  law.entries[0].memory[0].a = 0.0;
  EXPECT_THROW(augment_memory(law), ValidationError);
}

TEST(LawText, RoundTripPreservesLaws) {
  MaterialConstants k;
  k.eps0 = 0.25;
  const std::vector<MaterialLaw> laws = {sequence_law(ExampleId::EX2, 3, k), sequence_law(ExampleId::EX5, 2, k),
                                         build_limit_law(ExampleId::EX3), build_limit_law(ExampleId::EX5, k),
                                         augment_memory(build_limit_law(ExampleId::MAXWELL, k)).law};
  for (const MaterialLaw& law : laws) {
    const std::string text = law_to_text(law);
    const MaterialLaw back = law_from_text(text);
    EXPECT_EQ(law_to_text(back), text);
    for (const Point& p : {Point{0.3, 0.4, 0.0}, Point{-0.7, 1.2, 0.0}, Point{1.5, -1.5, 0.0}}) {
      const Complex z(law.nu0 + 1.5, 0.5);
      EXPECT_LE(max_rel_diff(back.eval(z, p), law.eval(z, p)), 1e-15) << text;
    }
  }
}

TEST(LawText, RejectsUnknownDirectives) {
  EXPECT_THROW(law_from_text("law a\nslot u m0 1 ; m2 0\n"), ValidationError);
  EXPECT_THROW(law_from_text("law a\nfoo 1\n"), ValidationError);
  EXPECT_THROW(law_from_text("law a\n"), ValidationError);
  EXPECT_THROW(law_from_text("slot u m0 1\nslot u m0 2\n"), ValidationError);
}
