#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "evohom/lab.hpp"

using namespace evohom;

namespace {

using Terms = std::vector<std::vector<SeparableSampler::Term>>;

const auto kOne = [](const Point&) { return 1.0; };
const auto kUnitTime = [](double) { return 1.0; };

PointSet unit_interval_points() { return tensor_points({0.0, 0.25, 0.5, 0.75, 1.0}, {0.0, 1.0}, 6, 1); }

bool is_pairing_or_norm(const std::string& q) { return q.rfind("pair", 0) == 0 || q.rfind("strong", 0) == 0; }

}  // namespace

TEST(PointSets, WeightsIntegrateTheDomain) {
  const PointSet p1 = unit_interval_points();
  double s = 0.0;
  for (double w : p1.w) s += w;
  EXPECT_NEAR(s, 1.0, 1e-15);
  const PointSet p2 = tensor_points({-2.0, 0.0, 2.0}, {-2.0, 1.0, 2.0}, 3, 2);
  s = 0.0;
  for (double w : p2.w) s += w;
  EXPECT_NEAR(s, 16.0, 1e-13);
  const TimePoints tp = time_points(TimeGrid::uniform(2.0, 8));
  s = 0.0;
  for (double w : tp.w) s += w;
  EXPECT_NEAR(s, 2.0, 1e-14);
}

TEST(Pairing, DocumentedExamples) {
  const PointSet ps = unit_interval_points();
  const TimePoints tp = time_points(TimeGrid::uniform(2.0, 4));
  const SeparableSampler one(Terms{{{kUnitTime, kOne}}}, ps);
  const TestFunction v{"1", {{0, kOne}}};
  EXPECT_NEAR(pairing(one, nullptr, ps, tp, v), 2.0, 1e-14);
  const SeparableSampler sine(
      Terms{{{kUnitTime, [](const Point& p) { return std::sin(2.0 * std::numbers::pi * p[0]); }}}}, ps);
  EXPECT_NEAR(pairing(sine, nullptr, ps, tp, v), 0.0, 1e-14);
  // <t x, x> over [0, 2] x (0, 1) = 2 * 1/3.
  const SeparableSampler tx(Terms{{{[](double t) { return t; }, [](const Point& p) { return p[0]; }}}}, ps);
  EXPECT_NEAR(pairing(tx, nullptr, ps, tp, {"x", {{0, [](const Point& p) { return p[0]; }}}}), 2.0 / 3.0, 1e-14);
}

TEST(StrongNorm, DocumentedExamples) {
  const PointSet ps = unit_interval_points();
  const TimePoints tp = time_points(TimeGrid::uniform(2.0, 4));
  const SeparableSampler c1(Terms{{{kUnitTime, [](const Point&) { return 3.0; }}}}, ps);
  const SeparableSampler c2(Terms{{{kUnitTime, [](const Point&) { return 0.5; }}}}, ps);
  EXPECT_NEAR(strong_norm_diff(c1, &c2, ps, tp, {"d", {0}}), 2.5 * std::sqrt(2.0), 1e-14);
  EXPECT_EQ(strong_norm_diff(c1, &c1, ps, tp, {"d", {0}}), 0.0);
  // Restricting to x < 1/2 halves the squared norm.
  const NormRequest left{"left", {0}, [](const Point& p) { return p[0] < 0.5; }};
  EXPECT_NEAR(strong_norm_diff(c1, &c2, ps, tp, left), 2.5, 1e-14);
}

TEST(CompositeSampler, SelectsSecondWhereMasked) {
  const PointSet ps = unit_interval_points();
  auto a = std::make_shared<SeparableSampler>(Terms{{{kUnitTime, [](const Point&) { return 1.0; }}}}, ps);
  auto b = std::make_shared<SeparableSampler>(Terms{{{kUnitTime, [](const Point&) { return 5.0; }}}}, ps);
  std::vector<char> mask(ps.size());
  for (int p = 0; p < ps.size(); ++p) mask[p] = ps.x[p][0] > 0.5;
  const CompositeSampler c(a, b, mask);
  const Vector v = c.sample(0, 1.0);
  for (int p = 0; p < ps.size(); ++p) EXPECT_EQ(v(p), mask[p] ? 5.0 : 1.0);
}

TEST(FitRate, DocumentedExamples) {
  EXPECT_NEAR(fit_rate({{1, 1.0}, {2, 0.5}, {4, 0.25}}), -1.0, 1e-14);
  EXPECT_NEAR(fit_rate({{1, 3.0}, {2, 3.0}, {4, 3.0}}), 0.0, 1e-14);
  // Figure data of the EX1 pairing with x, read at n = 2, 4, 16.
  EXPECT_NEAR(fit_rate({{2, 1.2138e-1}, {4, 6.0692e-2}, {16, 1.5173e-2}}), -1.0, 1e-3);
}

TEST(FitRate, RejectsBadInput) {
  EXPECT_THROW(fit_rate({{1, 1.0}, {2, 0.5}}), ValidationError);
  EXPECT_THROW(fit_rate({{1, 1.0}, {2, 0.0}, {4, 0.25}}), ValidationError);
  EXPECT_THROW(fit_rate({{1, 1.0}, {2, -0.5}, {4, 0.25}}), ValidationError);
  EXPECT_THROW(fit_rate({{2, 1.0}, {2, 0.5}, {2, 0.25}}), ValidationError);
}

TEST(Registry, MeshRulesRespectStripeAlignment) {
  for (ExampleId id : {ExampleId::EX1, ExampleId::EX2, ExampleId::EX3, ExampleId::EX4, ExampleId::EX5})
    for (int n : {1, 2, 3, 4, 8, 16}) {
      const Mesh m = example_mesh(id, n);
      const double lo = id == ExampleId::EX1 || id == ExampleId::EX2 ? 0.0 : -1.0;
      for (int k = 0; k <= 2 * n * (lo < 0.0 ? 2 : 1); ++k)
        EXPECT_GE(m.x.find_node(lo + k * 0.5 / n), 0) << to_string(id) << " n = " << n << " k = " << k;
    }
  EXPECT_EQ(example_mesh(ExampleId::EX1, 3).x.cells(), 30);
  EXPECT_EQ(example_mesh(ExampleId::EX3, 2).x.cells(), 80);
  const Mesh g = example_mesh(ExampleId::EX4, 2);
  EXPECT_EQ(g.x.cells(), 20);
  EXPECT_EQ(g.y.cells(), 80);
}

TEST(Registry, DictionariesHaveTheDocumentedEntries) {
  EXPECT_EQ(test_dictionary(ExampleId::EX1).size(), 5u);
  EXPECT_EQ(test_dictionary(ExampleId::EX3).size(), 10u);
  const auto d4 = test_dictionary(ExampleId::EX4);
  ASSERT_EQ(d4.size(), 5u);
  EXPECT_EQ(d4[0].name, "v_1");
  EXPECT_EQ(d4[0].terms.size(), 2u);
}

TEST(Registry, MemoryExampleGetsIntrinsicSlot) {
  const ExperimentSpec spec{.example = ExampleId::EX5};
  const EvolutionProblem p =
      make_problem(ExampleId::EX5, example_mesh(ExampleId::EX5, 1), 0, build_limit_law(ExampleId::EX5), spec);
  EXPECT_EQ(p.space.slot_count(), 4);
  EXPECT_EQ(p.space.slot(3).space.label(), "DG-Q0");
  EXPECT_FALSE(p.law.has_memory());
}

TEST(ExperimentSpec, ValidationRejectsBadSpecs) {
  ExperimentSpec s;
  EXPECT_NO_THROW(validate(s));
  s.slabs = -3;
  EXPECT_THROW(validate(s), ValidationError);
  s = {};
  s.example = ExampleId::MAXWELL;
  EXPECT_THROW(validate(s), ValidationError);
  s = {};
  s.n_list = {1, 0};
  EXPECT_THROW(validate(s), ValidationError);
  s = {};
  s.rho = -1.0;
  EXPECT_THROW(validate(s), ValidationError);
}

TEST(Config, ParsesKeysCommentsAndLists) {
  const ExperimentSpec s = parse_config(
      "# sweep settings\n"
      "example = EX4\n"
      "n-list = 2, 4,8\n"
      "slabs = 32   # coarse\n"
      "rho = 0.5\n"
      "eps0 = 2\n"
      "ref_degree = 2\n");
  EXPECT_EQ(s.example, ExampleId::EX4);
  EXPECT_EQ(s.n_list, (std::vector<int>{2, 4, 8}));
  EXPECT_EQ(s.slabs, 32);
  EXPECT_EQ(s.rho, 0.5);
  EXPECT_EQ(s.constants.eps0, 2.0);
  EXPECT_EQ(s.ref_degree, 2);
  EXPECT_THROW(parse_config("colour = red\n"), ValidationError);
  EXPECT_THROW(parse_config("slabs 3\n"), ValidationError);
  EXPECT_THROW(parse_config("slabs = 2.5\n"), ValidationError);
  EXPECT_THROW(parse_config("n_list = 1,x\n"), ValidationError);
  EXPECT_THROW(parse_config("example = EX9\n"), ValidationError);
  EXPECT_THROW(parse_config("slabs = 0\n"), ValidationError);
}

TEST(Csv, HeaderAndRowFormat) {
  std::ostringstream os;
  write_csv_header(os);
  write_csv_rows(os, {{"EX1", 4, "pair_u_x", 0.0123}, {"EX1", 0, "slope:pair_u_x", -1.0}});
  EXPECT_EQ(os.str(),
            "example,n,quantity,value\n"
            "EX1,4,pair_u_x,1.2300000000e-02\n"
            "EX1,0,slope:pair_u_x,-1.0000000000e+00\n");
}

TEST(Report, LooksUpValuesAndSeries) {
  ConvergenceReport r;
  r.example = "EX2";
  r.add(1, "a", 1.0);
  r.add(2, "a", 0.5);
  r.add(0, "slope:a", -1.0);
  EXPECT_EQ(r.value(2, "a"), 0.5);
  EXPECT_EQ(r.series("a").size(), 2u);
  EXPECT_THROW(r.value(3, "a"), ValidationError);
}

TEST(OraclePairing, ConstantTestFunctionIsSmall) {
  // The homogenised solution is the weak limit, but <u_1 - u_hom, 1> is not zero at n = 1.
  const double x1 = oracle_pairing(1, 2.0, [](double, double x) { return x; });
  const double x2 = oracle_pairing(2, 2.0, [](double, double x) { return x; });
  EXPECT_NEAR(x1 / x2, 2.0, 0.1);
  // Self-convergence in the quadrature order.
  EXPECT_NEAR(oracle_pairing(3, 2.0, [](double, double x) { return x; }, 20),
              oracle_pairing(3, 2.0, [](double, double x) { return x; }, 30), 1e-12);
}

TEST(Sweep, Ex1PairingsAgreeWithPureOracle) {
  ExperimentSpec spec;
  spec.example = ExampleId::EX1;
  spec.degree = 1;
  const ConvergenceReport r = single_run(spec, 1);
  const double fem_x = r.value(1, "pair_u_x");
  const double ora_x = oracle_pairing(1, 2.0, [](double, double x) { return x; });
  EXPECT_NEAR(fem_x, ora_x, 1e-4);
  const double fem_x2 = r.value(1, "pair_u_x2");
  const double ora_x2 = oracle_pairing(1, 2.0, [](double, double x) { return x * x; });
  EXPECT_NEAR(fem_x2, ora_x2, 1e-4);
  const double fem_s = r.value(1, "pair_u_sinpix");
  const double ora_s = oracle_pairing(1, 2.0, [](double, double x) { return std::sin(std::numbers::pi * x); });
  EXPECT_NEAR(fem_s, ora_s, 1e-4);
  EXPECT_LT(r.value(1, "pair_u_1"), 1e-4);
}

TEST(Sweep, ReferenceIsSelfConsistentAcrossMeshLevels) {
  for (ExampleId id : {ExampleId::EX2, ExampleId::EX3}) {
    ExperimentSpec a;
    a.example = id;
    a.n_list = {2};
    a.ref_n = 8;
    ExperimentSpec b = a;
    b.ref_n = 16;
    const ConvergenceReport ra = convergence_sweep(a, {}, nullptr, 1);
    const ConvergenceReport rb = convergence_sweep(b, {}, nullptr, 1);
    for (const ReportRow& row : ra.rows) {
      if (row.quantity.rfind("pair", 0) != 0) continue;
      const double other = rb.value(row.n, row.quantity);
      EXPECT_TRUE(std::abs(row.value - other) <= std::max(0.1 * std::abs(row.value), 1e-5))
          << to_string(id) << " " << row.quantity << ": " << row.value << " vs " << other;
    }
  }
}

TEST(Sweep, StabilityRatioStaysBoundedAcrossN) {
  ExperimentSpec spec;
  spec.example = ExampleId::EX2;
  spec.n_list = {1, 2, 4, 8};
  const ConvergenceReport r = convergence_sweep(spec, {}, nullptr, 1);
  double lo = 1e300, hi = 0.0;
  for (auto [n, v] : r.series("stability_ratio")) {
    ASSERT_TRUE(std::isfinite(v));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LE(hi, 1.5 * lo);
}

TEST(Sweep, CsvIsDeterministicAndThreadIndependent) {
  ExperimentSpec spec;
  spec.example = ExampleId::EX3;
  spec.n_list = {1, 2, 4};
  std::ostringstream one, two;
  write_csv_header(one);
  write_csv_header(two);
  const ConvergenceReport r1 = convergence_sweep(spec, {}, &one, 1);
  convergence_sweep(spec, {}, &two, 3);
  EXPECT_EQ(one.str(), two.str());
  // Every requested quantity is present and finite for every n; slopes follow.
  for (int n : spec.n_list) {
    for (const ReportRow& row : r1.rows) {
      if (row.n == spec.n_list.front() && is_pairing_or_norm(row.quantity)) {
        EXPECT_TRUE(std::isfinite(r1.value(n, row.quantity))) << row.quantity;
      }
    }
  }
  EXPECT_NO_THROW(r1.value(0, "slope:pair_v_x"));
  std::istringstream lines(one.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "example,n,quantity,value");
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("EX3,1,", 0), 0u) << line;
}
