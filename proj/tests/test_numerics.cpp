#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "aggmin/numerics.hpp"

using namespace aggmin;

TEST(LogGamma, Anchors) {
  EXPECT_NEAR(log_gamma(1.0), 0.0, 1e-15);
  EXPECT_NEAR(log_gamma(0.5), 0.5723649429247001, 1e-12);
  EXPECT_NEAR(log_gamma(2.5), 0.2846828704729192, 1e-12);
}

TEST(LogGamma, RelativeAccuracyOnRange) {
  // Independent oracle: Boost's lgamma.
  for (double x = 0.1; x <= 50.0; x *= 1.05) {
    const double ref = boost::math::lgamma(x);
    EXPECT_LE(std::abs(log_gamma(x) - ref), 1e-10 * std::max(1.0, std::abs(ref))) << x;
  }
}

TEST(LogGamma, Domain) {
  EXPECT_THROW(log_gamma(0.0), DomainError);
  EXPECT_THROW(log_gamma(-1.5), DomainError);
}

namespace {

// Second, independent route to C(gamma): std::tgamma products.
double hls_direct(double g, int n) {
  const double nn = n;
  return std::pow(std::numbers::pi, -g / 2.0) * std::tgamma(nn / 2.0 + g / 2.0) / std::tgamma(nn + g / 2.0) *
         std::pow(std::tgamma(nn / 2.0) / std::tgamma(nn), -1.0 - g / nn);
}

}  // namespace

TEST(HlsConstant, GammaMinusOneInThreeDimensions) {
  // pi^{1/2} Gamma(1) / Gamma(5/2) = 4/3 and (Gamma(3/2)/Gamma(3))^{-2/3} = (sqrt(pi)/4)^{-2/3}.
  const double exact = (4.0 / 3.0) * std::pow(std::sqrt(std::numbers::pi) / 4.0, -2.0 / 3.0);
  EXPECT_NEAR(hls_sharp_constant(-1.0, 3), exact, 1e-12 * exact);
  EXPECT_NEAR(hls_sharp_constant(-1.0, 3), 2.294010703541599, 1e-9);
}

TEST(HlsConstant, MatchesIndependentFormulaOnGrid) {
  int count = 0;
  for (int n : {1, 2, 3, 4, 5}) {
    for (double frac : {0.1, 0.3, 0.6, 0.9}) {
      const double g = -frac * n;
      const double a = hls_sharp_constant(g, n);
      const double b = hls_direct(g, n);
      EXPECT_LE(std::abs(a - b), 1e-9 * b) << "gamma=" << g << " N=" << n;
      ++count;
    }
  }
  EXPECT_EQ(count, 20);
}

TEST(HlsConstant, ContinuityAtZero) { EXPECT_NEAR(hls_sharp_constant(-1e-6, 3), 1.0, 1e-4); }

TEST(HlsConstant, GammaMinusTwo) {
  const double c = hls_sharp_constant(-2.0, 3);
  EXPECT_GT(c, 0.0);
  EXPECT_NEAR(c, hls_direct(-2.0, 3), 1e-9 * c);
  EXPECT_NEAR(c, 7.303872119375109, 1e-9);
}

TEST(HlsConstant, Domain) {
  EXPECT_THROW(hls_sharp_constant(0.0, 3), DomainError);
  EXPECT_THROW(hls_sharp_constant(-3.0, 3), DomainError);
  EXPECT_THROW(hls_sharp_constant(0.5, 3), DomainError);
}

TEST(UnitBall, Volumes) {
  EXPECT_NEAR(unit_ball_volume(1), 2.0, 1e-14);
  EXPECT_NEAR(unit_ball_volume(2), std::numbers::pi, 1e-14);
  EXPECT_NEAR(unit_ball_volume(3), 4.0 * std::numbers::pi / 3.0, 1e-14);
}

TEST(CompensatedSum, Examples) {
  EXPECT_EQ(compensated_sum(std::vector<double>{1.0, 1e16, 1.0, -1e16}), 2.0);
  EXPECT_EQ(compensated_sum(std::vector<double>{}), 0.0);
  const std::vector<double> tenths(1000000, 0.1);
  EXPECT_NEAR(compensated_sum(tenths), 100000.0, 1e-6);
}

TEST(CompensatedSum, RejectsNonFinite) {
  EXPECT_THROW(compensated_sum(std::vector<double>{1.0, NAN}), NumericalFailure);
  EXPECT_THROW(compensated_sum(std::vector<double>{INFINITY}), NumericalFailure);
}

TEST(CompensatedSum, MatchesExactRationalOnCancellationSuites) {
  using boost::multiprecision::cpp_rational;
  SeededRng rng(2024);
  for (int suite = 0; suite < 40; ++suite) {
    std::vector<double> v;
    for (int i = 0; i < 200; ++i) {
      const double big = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.next_u32() % 120) - 60);
      v.push_back(big);
      if (i % 3 == 0) v.push_back(-big);  // exact cancellation partners
    }
    cpp_rational exact = 0;
    for (double x : v) exact += cpp_rational(x);
    const double ref = static_cast<double>(exact);
    EXPECT_EQ(compensated_sum(v), ref) << "suite " << suite;
  }
}

TEST(CompensatedSum, ChunkedMergeIsOrderFixed) {
  SeededRng rng(1);
  std::vector<double> v(5000);
  for (auto& x : v) x = rng.uniform(-1e6, 1e6);
  CompensatedSum a;
  CompensatedSum b;
  CompensatedSum parts[5];
  for (std::size_t i = 0; i < v.size(); ++i) {
    a.add(v[i]);
    parts[i / 1000].add(v[i]);
  }
  for (auto& p : parts) b.merge(p);
  EXPECT_NEAR(a.value(), b.value(), 1e-9);
}

TEST(Projection, FeasibleInputUnchanged) {
  const std::vector<double> v = {0.5, 0.25};
  const std::vector<double> w = {1.0, 2.0};
  EXPECT_EQ(project_capped_box(v, w, 1.0, 1.0), v);
}

TEST(Projection, CapBinds) {
  const auto out = project_capped_box(std::vector<double>{2.0, 0.0}, std::vector<double>{1.0, 1.0}, 1.0, 1.0);
  EXPECT_NEAR(out[0], 1.0, 1e-12);
  EXPECT_NEAR(out[1], 0.0, 1e-12);
}

TEST(Projection, SymmetricSplit) {
  const auto out = project_capped_box(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}, 1.0, 0.5);
  EXPECT_NEAR(out[0], 0.25, 1e-13);
  EXPECT_NEAR(out[1], 0.25, 1e-13);
}

TEST(Projection, Infeasible) {
  EXPECT_THROW(project_capped_box(std::vector<double>{0.0}, std::vector<double>{1.0}, 1.0, 2.0), ConfigError);
  EXPECT_THROW(project_capped_box(std::vector<double>{0.0}, std::vector<double>{1.0, 1.0}, 1.0, 0.5), ConfigError);
}

TEST(Projection, PropertiesOnRandomInputs) {
  SeededRng rng(99);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.next_u32() % 300;
    std::vector<double> v(n);
    std::vector<double> w(n);
    for (auto& x : v) x = rng.uniform(-3.0, 5.0);
    for (auto& x : w) x = rng.uniform(1e-3, 2.0);
    double capacity = 0.0;
    for (double x : w) capacity += x;
    const double cap = rng.uniform(0.5, 2.0);
    const double target = rng.uniform(0.05, 0.95) * capacity * cap;
    const auto p = project_capped_box(v, w, cap, target);
    CompensatedSum m;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_GE(p[i], 0.0);
      ASSERT_LE(p[i], cap);
      m.add(p[i] * w[i]);
    }
    EXPECT_LE(std::abs(m.value() - target), 1e-12 * target);
    const auto q = project_capped_box(p, w, cap, target);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(q[i], p[i], 1e-12);
    // Optimality: the output is clamp(v - lambda) for one common lambda.
    double lambda = NAN;
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] > 0.0 && p[i] < cap) {
        if (std::isnan(lambda)) lambda = v[i] - p[i];
        EXPECT_NEAR(v[i] - p[i], lambda, 1e-9);
      }
    }
  }
}

TEST(Rng, Determinism) {
  SeededRng a(42);
  SeededRng b(42);
  SeededRng c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u32();
    EXPECT_EQ(x, b.next_u32());
    differs = differs || x != c.next_u32();
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.seed(), 42u);
}

TEST(Rng, StreamsDiffer) {
  SeededRng a(42, 0);
  SeededRng b(42, 1);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u32() == b.next_u32();
  EXPECT_LT(same, 3);
}

TEST(Rng, UniformMean) {
  SeededRng rng(7);
  CompensatedSum s;
  for (int i = 0; i < 1000000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s.add(u);
  }
  EXPECT_NEAR(s.value() / 1e6, 0.5, 0.002);
}

TEST(Rng, UnitBallContainmentAndRadialLaw) {
  SeededRng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const auto p = rng_sample_unit_ball(rng, 1);
    ASSERT_LE(std::abs(p[0]), 1.0);
  }
  for (int dim : {3, 5}) {
    CompensatedSum s;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      const auto p = rng_sample_unit_ball(rng, dim);
      double r2 = 0.0;
      for (double c : p) r2 += c * c;
      ASSERT_LE(r2, 1.0);
      s.add(std::pow(std::sqrt(r2), dim));
    }
    EXPECT_NEAR(s.value() / draws, 0.5, 0.01) << "N=" << dim;  // |x|^N is uniform on [0,1]
  }
}

TEST(Rng, SameSeedSameSamples) {
  SeededRng a(42);
  SeededRng b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(rng_sample_unit_ball(a, 3), rng_sample_unit_ball(b, 3));
}
