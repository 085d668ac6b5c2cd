#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "evohom/timecore.hpp"

using namespace evohom;

namespace {

/// Independent oracle: adaptive Gauss-Kronrod integral of t^k e^{-2 rho t} on [0, h].
double moment_oracle(double h, double rho, int k) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(
      [&](double t) { return std::pow(t, k) * std::exp(-2.0 * rho * t); }, 0.0, h, 8, 1e-14);
}

}  // namespace

TEST(TimeGrid, RejectsMalformedPoints) {
  EXPECT_THROW(TimeGrid({0.0}), ValidationError);
  EXPECT_THROW(TimeGrid({0.1, 1.0}), ValidationError);
  EXPECT_THROW(TimeGrid({0.0, 1.0, 1.0}), ValidationError);
  EXPECT_THROW(TimeGrid::uniform(0.0, 4), ValidationError);
  EXPECT_THROW(TimeGrid::uniform(1.0, 0), ValidationError);
}

TEST(TimeGrid, HalfOpenSlabConvention) {
  const TimeGrid g = TimeGrid::uniform(2.0, 4);
  EXPECT_EQ(g.slabs(), 4);
  EXPECT_DOUBLE_EQ(g.final_time(), 2.0);
  EXPECT_TRUE(g.is_uniform());
  EXPECT_EQ(g.locate(0.5), 1);  // t_1 belongs to slab 1, not slab 2
  EXPECT_EQ(g.locate(0.5000001), 2);
  EXPECT_EQ(g.locate(2.0), 4);
  EXPECT_THROW(g.locate(0.0), ValidationError);
  EXPECT_THROW(g.locate(2.1), ValidationError);
  EXPECT_FALSE(TimeGrid({0.0, 1.0, 3.0}).is_uniform());
}

TEST(WeightedMoments, UnweightedMonomials) {
  const auto m = weighted_moments(1.0, 0.0, 2);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_DOUBLE_EQ(m[0], 1.0);
  EXPECT_DOUBLE_EQ(m[1], 0.5);
  EXPECT_DOUBLE_EQ(m[2], 1.0 / 3.0);
}

TEST(WeightedMoments, ExponentialWeight) {
  EXPECT_NEAR(weighted_moments(1.0, 0.5, 0)[0], 1.0 - std::exp(-1.0), 1e-15);
  const auto m = weighted_moments(2.0, 1.0, 1);
  EXPECT_NEAR(m[0], 0.49084218055563, 1e-13);
  EXPECT_NEAR(m[0], moment_oracle(2.0, 1.0, 0), 1e-14);
  EXPECT_NEAR(m[1], moment_oracle(2.0, 1.0, 1), 1e-14);
}

TEST(WeightedMoments, RejectsInvalidInput) {
  EXPECT_THROW(weighted_moments(0.0, 0.0, 1), ValidationError);
  EXPECT_THROW(weighted_moments(-1.0, 0.0, 1), ValidationError);
  EXPECT_THROW(weighted_moments(1.0, -0.5, 1), ValidationError);
}

TEST(WeightedMoments, AgreeWithAdaptiveQuadratureAcrossRegimes) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> lh(std::log(1e-3), std::log(10.0)), ur(0.0, 4.0);
  for (int i = 0; i < 100; ++i) {
    const double h = std::exp(lh(rng)), rho = ur(rng);
    const auto m = weighted_moments(h, rho, 3);
    for (int k = 0; k <= 3; ++k) {
      const double ref = moment_oracle(h, rho, k);
      EXPECT_NEAR(m[k], ref, 1e-13 * std::abs(ref)) << "h=" << h << " rho=" << rho << " k=" << k;
    }
  }
}

TEST(RadauRule, UnweightedUnitSlab) {
  const WeightedRadauRule r = build_radau_rule(0.0, 1.0, 0.0);
  EXPECT_NEAR(r.nodes[0], 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.nodes[1], 1.0);
  EXPECT_NEAR(r.weights[0], 0.75, 1e-15);
  EXPECT_NEAR(r.weights[1], 0.25, 1e-15);
  EXPECT_NEAR(r.apply([](double t) { return t * t; }), 1.0 / 3.0, 1e-15);
}

TEST(RadauRule, WeightedConstantMatchesZerothMoment) {
  const WeightedRadauRule r = build_radau_rule(0.0, 1.0, 1.0);
  EXPECT_NEAR(r.apply([](double) { return 1.0; }), (1.0 - std::exp(-2.0)) / 2.0, 1e-15);
}

TEST(RadauRule, ExactOnQuadraticsPositiveWeightsRightEndpoint) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> lh(std::log(1e-3), std::log(10.0)), ur(0.0, 4.0), ut(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double h = std::exp(lh(rng)), rho = ur(rng), t0 = ut(rng);
    const WeightedRadauRule r = build_radau_rule(t0, t0 + h, rho);
    EXPECT_DOUBLE_EQ(r.nodes[1], t0 + h);
    EXPECT_GT(r.nodes[0], t0);
    EXPECT_LT(r.nodes[0], t0 + h);
    EXPECT_GT(r.weights[0], 0.0);
    EXPECT_GT(r.weights[1], 0.0);
    for (int k = 0; k <= 2; ++k) {
      const double q = r.apply([&](double t) { return std::pow(t - t0, k); });
      const double ref = moment_oracle(h, rho, k);
      EXPECT_LE(std::abs(q - ref), 1e-12 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST(RadauRule, AffineCovariance) {
  // Scaling the slab by s and rho by 1/s scales weights by s and maps nodes affinely.
  const WeightedRadauRule a = build_radau_rule(0.0, 0.7, 1.3);
  for (double s : {0.1, 3.0, 17.0}) {
    const WeightedRadauRule b = build_radau_rule(0.0, 0.7 * s, 1.3 / s);
    for (int q = 0; q < 2; ++q) {
      EXPECT_NEAR(b.nodes[q], s * a.nodes[q], 1e-13 * s);
      EXPECT_NEAR(b.weights[q], s * a.weights[q], 1e-13 * s);
    }
  }
}

TEST(RadauRule, RejectsDegenerateSlab) {
  EXPECT_THROW(build_radau_rule(1.0, 1.0, 0.0), ValidationError);
  EXPECT_THROW(build_radau_rule(0.0, 1.0, -1.0), ValidationError);
}

TEST(TemporalMatrices, MatchWeightedIntegralsOfLegendreBasis) {
  for (double rho : {0.0, 0.8}) {
    const double t0 = 0.4, h = 0.25;
    const WeightedRadauRule r = build_radau_rule(t0, t0 + h, rho);
    const SlabTemporalMatrices tm = slab_temporal_matrices(r);
    using boost::math::quadrature::gauss_kronrod;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const auto w = [&](double t) { return std::exp(-2.0 * rho * (t - t0)); };
        const auto phi = [&](int k, double t) { return temporal_basis(k, (t - t0) / h); };
        const double mass = gauss_kronrod<double, 31>::integrate(
            [&](double t) { return phi(j, t) * phi(i, t) * w(t); }, t0, t0 + h);
        const double deriv = gauss_kronrod<double, 31>::integrate(
            [&](double t) { return temporal_basis_dt(j, h) * phi(i, t) * w(t); }, t0, t0 + h);
        EXPECT_NEAR(tm.mass[i][j], mass, 1e-14);
        EXPECT_NEAR(tm.deriv[i][j], deriv, 1e-13);
        // Jump term phi_j(t0+) phi_i(t0+).
        EXPECT_NEAR(tm.jump[i][j], phi(j, t0) * phi(i, t0), 1e-15);
      }
  }
}
