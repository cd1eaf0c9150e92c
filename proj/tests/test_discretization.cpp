#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "aggmin/analytic.hpp"
#include "aggmin/discretization.hpp"

using namespace aggmin;

namespace {

std::shared_ptr<const RadialGrid> grid3(std::size_t cells, double rmax = 1.5) {
  return std::make_shared<const RadialGrid>(3, rmax, cells);
}

}  // namespace

TEST(Ensemble, Validation) {
  EXPECT_THROW(ParticleEnsemble(3, {0.0, 0.0}, {1.0}), ConfigError);
  EXPECT_THROW(ParticleEnsemble(1, {0.0}, {0.0}), ConfigError);
  EXPECT_THROW(ParticleEnsemble(1, {NAN}, {1.0}), NumericalFailure);
  const ParticleEnsemble e(2, {1.0, 2.0, 3.0, 4.0}, {0.25, 0.75});
  EXPECT_EQ(e.size(), 2u);
  EXPECT_EQ(e.position(1)[0], 3.0);
  EXPECT_DOUBLE_EQ(e.total_mass(), 1.0);
}

TEST(SampleBall, SingleParticleInside) {
  SeededRng rng(42);
  const std::vector<double> c = {1.0, -1.0, 2.0};
  const auto e = sample_uniform_ball(rng, 1, 0.5, c, 3, 2.0);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e.weight(0), 2.0);
  double r2 = 0.0;
  for (int d = 0; d < 3; ++d) r2 += std::pow(e.position(0)[d] - c[d], 2);
  EXPECT_LE(std::sqrt(r2), 0.5);
}

TEST(SampleBall, SecondMoment) {
  SeededRng rng(42);
  const std::vector<double> c = {0.0, 0.0, 0.0};
  const auto e = sample_uniform_ball(rng, 10000, 1.0, c, 3, 1.0);
  EXPECT_NEAR(moments(e).second_moment, 0.6, 0.03 * 0.6);
}

TEST(SampleBall, Deterministic) {
  const std::vector<double> c = {0.0, 0.0, 0.0};
  SeededRng a(5);
  SeededRng b(5);
  EXPECT_EQ(sample_uniform_ball(a, 100, 2.0, c, 3, 1.0), sample_uniform_ball(b, 100, 2.0, c, 3, 1.0));
}

TEST(Moments, TwoParticles) {
  const double a = 0.3;
  const ParticleEnsemble e(3, {a, 0.0, 0.0, -a, 0.0, 0.0}, {0.5, 0.5});
  const auto m = moments(e);
  EXPECT_DOUBLE_EQ(m.mass, 1.0);
  EXPECT_NEAR(m.center[0], 0.0, 1e-16);
  EXPECT_DOUBLE_EQ(m.second_moment, a * a);
}

TEST(Moments, BallSecondMoment) {
  const auto b = ball_solution(3, 1.0, 1.0);
  const auto d = RadialDensity::uniform_ball(grid3(4096), b.r0, b.height, 0.75);
  const auto m = moments(d);
  EXPECT_NEAR(m.mass, 1.0, 1e-12);
  EXPECT_NEAR(m.second_moment, 0.6 * std::pow(3.0, -2.0 / 3.0), 1e-4);
  EXPECT_NEAR(m.second_moment, 0.288450, 1e-4);
}

TEST(Moments, ZeroDensity) {
  const auto m = moments(RadialDensity::constant(grid3(16), 0.0, 1.0));
  EXPECT_EQ(m.mass, 0.0);
  EXPECT_EQ(m.second_moment, 0.0);
  const auto l = moments(LineDensity(1.0, std::vector<double>(10, 0.0), 1.0));
  EXPECT_EQ(l.mass, 0.0);
}

TEST(Moments, LineIsExactForPiecewiseConstant) {
  // rho = 1 on [-1, 1]: mass 2, second moment 2/3.
  const auto d = LineDensity(1.0, std::vector<double>(7, 1.0), 1.0);
  const auto m = moments(d);
  EXPECT_NEAR(m.mass, 2.0, 1e-14);
  EXPECT_NEAR(m.second_moment, 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(m.center[0], 0.0, 1e-15);
}

TEST(RadialGrid, WeightsSumToBallVolume) {
  for (int dim : {3, 4, 5}) {
    const RadialGrid g(dim, 1.7, 333);
    CompensatedSum s;
    for (double w : g.volumes()) s.add(w);
    const double expect = unit_ball_volume(dim) * std::pow(1.7, dim);
    EXPECT_NEAR(s.value(), expect, 1e-12 * expect);
  }
}

TEST(RadialGrid, SelfTermMatchesQuadrature) {
  // \iint_{shell^2} max(|x|,|y|)^{2-N} = 2 (N w)^2 \int_a^b s^{N-1} \int_a^s t^{N-1} s^{2-N} dt ds.
  const RadialGrid g(3, 1.0, 10);
  const double nw = 3.0 * g.omega();
  for (std::size_t i : {0u, 4u, 9u}) {
    const double a = g.lower(i);
    const double b = g.upper(i);
    // Closed form for N = 3: 2 (3w)^2 \int_a^b s (s^3 - a^3)/3 ds.
    const double expect = 2.0 * nw * nw / 3.0 * ((std::pow(b, 5) - std::pow(a, 5)) / 5.0 - std::pow(a, 3) * (b * b - a * a) / 2.0);
    EXPECT_NEAR(g.newton_self()[i], expect, 1e-12 * expect);
  }
}

TEST(RadialDensity, Invariants) {
  auto g = grid3(8);
  EXPECT_THROW(RadialDensity(g, std::vector<double>(7, 0.1), 1.0), ConfigError);
  EXPECT_THROW(RadialDensity(g, std::vector<double>(8, -0.1), 1.0), ConfigError);
  EXPECT_THROW(RadialDensity(g, std::vector<double>(8, 1.1), 1.0), ConfigError);
  EXPECT_THROW(RadialDensity(g, std::vector<double>(8, 0.1), 0.0), ConfigError);
}

TEST(Concentration, Particles) {
  const ParticleEnsemble one(2, {0.3, 0.4}, {1.0});
  EXPECT_EQ(concentration_mass(one, 1.0), 1.0);
  const ParticleEnsemble two(1, {0.0, 10.0}, {1.0, 1.0});
  EXPECT_EQ(concentration_mass(two, 1.0), 1.0);
  const std::vector<std::vector<double>> mid = {{5.0}};
  EXPECT_EQ(concentration_mass(two, 5.0, mid), 2.0);
}

TEST(Concentration, BallAtOrigin) {
  const auto b = ball_solution(3, 1.0, 1.0);
  const auto d = RadialDensity::uniform_ball(grid3(1024), b.r0, b.height, 0.75);
  const std::vector<std::vector<double>> origin = {{0.0, 0.0, 0.0}};
  // The edge cell is partially filled, so a little of its mass lies past r0.
  EXPECT_NEAR(concentration_mass(d, b.r0, origin), 1.0, 3.0 * d.grid().width() / b.r0);
  EXPECT_NEAR(concentration_mass(d, b.r0 + d.grid().width(), origin), 1.0, 1e-12);
  EXPECT_NEAR(concentration_mass(d, 2.0, origin), 1.0, 1e-12);
}

TEST(Concentration, OffCenterBallMatchesLensVolume) {
  // Uniform unit-height ball of radius 1; B(y, R) with |y| = 1, R = 1 holds the
  // lens volume 5 pi / 12.
  auto g = std::make_shared<const RadialGrid>(3, 1.0, 400);
  const auto d = RadialDensity::constant(g, 1.0, 1.0);
  const std::vector<std::vector<double>> y = {{1.0, 0.0, 0.0}};
  EXPECT_NEAR(concentration_mass(d, 1.0, y), 5.0 * std::numbers::pi / 12.0, 1e-9);
}

TEST(Concentration, NondecreasingInRadius) {
  SeededRng rng(3);
  auto g = grid3(64);
  std::vector<double> v(64);
  for (auto& x : v) x = rng.uniform(0.0, 1.0);
  const RadialDensity d(g, v, 1.0);
  const LineDensity l(1.5, v, 1.0);
  const std::vector<std::vector<double>> c3 = {{0.4, 0.1, 0.0}};
  const std::vector<std::vector<double>> c1 = {{0.2}};
  double prev_r = 0.0;
  double prev_l = 0.0;
  for (double r = 0.01; r < 4.0; r *= 1.1) {
    const double mr = concentration_mass(d, r, c3);
    const double ml = concentration_mass(l, r, c1);
    EXPECT_GE(mr, prev_r - 1e-13);
    EXPECT_GE(ml, prev_l - 1e-13);
    prev_r = mr;
    prev_l = ml;
  }
}

TEST(Concentration, LineExactOverlap) {
  const LineDensity d(1.0, std::vector<double>(4, 1.0), 1.0);  // cells of width 0.5
  const std::vector<std::vector<double>> c = {{0.1}};
  EXPECT_NEAR(concentration_mass(d, 0.3, c), 0.6, 1e-15);
}

TEST(SupportRadius, RadialIndicator) {
  auto g = grid3(1024);
  const double r0 = std::cbrt(1.0 / 3.0);
  const auto d = RadialDensity::uniform_ball(g, r0, 0.7, 1.0);
  EXPECT_NEAR(support_radius(d, 0.5), 0.69336, g->width());
}

TEST(SupportRadius, LineIndicator) {
  const double l = std::cbrt(4.0) - 1.0;
  const auto d = LineDensity::from_function(1.5, 2048, 2.0, [&](double x) { return std::abs(x) <= l ? 1.0 : 0.0; });
  EXPECT_NEAR(support_radius(d, 0.5), 0.5874, d.width());
}

TEST(SupportRadius, FullSupportAndErrors) {
  auto g = grid3(100, 2.0);
  const auto d = RadialDensity::constant(g, 0.3, 1.0);
  EXPECT_NEAR(support_radius(d, 0.5), 2.0, g->width());
  EXPECT_THROW(support_radius(RadialDensity::constant(g, 0.0, 1.0), 0.5), DomainError);
  EXPECT_THROW(support_radius(d, 1.0), DomainError);
  EXPECT_THROW(support_radius(d, 0.0), DomainError);
}
