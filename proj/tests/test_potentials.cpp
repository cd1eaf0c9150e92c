#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "aggmin/potentials.hpp"

using namespace aggmin;

TEST(Kernel, PowerLawValues) {
  const PowerLawKernel k{-1.0, 2.0};
  EXPECT_DOUBLE_EQ(kernel_value(k, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(kernel_value(k, 2.0), 2.5);
}

TEST(Kernel, ExponentialValue) {
  EXPECT_NEAR(kernel_value(ExponentialKernel{}, 0.5), 0.6065306597126334, 1e-15);
  EXPECT_NEAR(kernel_value(Kernel{ExponentialKernel{}}, 0.5), 0.606531, 1e-6);
}

TEST(Kernel, PowerLawSlopes) {
  const PowerLawKernel k{-1.0, 2.0};
  EXPECT_EQ(kernel_slope(k, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(kernel_slope(k, 2.0), 1.75);
  EXPECT_DOUBLE_EQ(kernel_slope(k, 0.5), -3.5);
  EXPECT_DOUBLE_EQ(kernel_slope(ExponentialKernel{}, 0.0 + 1.0), -std::exp(-1.0));
}

TEST(Kernel, RejectsNonPositiveRadius) {
  const PowerLawKernel k{-1.0, 2.0};
  EXPECT_THROW(kernel_value(k, 0.0), DomainError);
  EXPECT_THROW(kernel_value(k, -1.0), DomainError);
  EXPECT_THROW(kernel_slope(k, 0.0), DomainError);
  EXPECT_THROW(kernel_value(ExponentialKernel{}, 0.0), DomainError);
  EXPECT_THROW(kernel_value(k, 1e-13), DomainError);  // inside the singular core
  EXPECT_NO_THROW(kernel_value(PowerLawKernel{0.5, 2.0}, 1e-13));
}

TEST(Kernel, Validation) {
  EXPECT_NO_THROW((PowerLawKernel{-1.0, 2.0}.validate(3)));
  EXPECT_THROW((PowerLawKernel{-3.0, 2.0}.validate(3)), ConfigError);  // p <= -N
  EXPECT_THROW((PowerLawKernel{2.0, 2.0}.validate(3)), ConfigError);   // q <= p
  EXPECT_THROW((PowerLawKernel{0.0, 2.0}.validate(3)), ConfigError);
  EXPECT_THROW((PowerLawKernel{-1.0, 0.0}.validate(3)), ConfigError);
}

TEST(Kernel, LowerBound) {
  EXPECT_DOUBLE_EQ(*kernel_lower_bound(PowerLawKernel{2.0, 4.0}), -0.25);
  EXPECT_DOUBLE_EQ(*kernel_lower_bound(PowerLawKernel{1.0, 2.0}), -0.5);
  EXPECT_FALSE(kernel_lower_bound(PowerLawKernel{-1.0, 2.0}).has_value());
}

TEST(Kernel, LowerBoundHoldsOnSamples) {
  for (const auto& k : {PowerLawKernel{2.0, 4.0}, PowerLawKernel{1.0, 2.0}, PowerLawKernel{0.5, 3.3}}) {
    const double lb = *kernel_lower_bound(k);
    for (double r = 1e-3; r <= 100.0; r *= 1.07) EXPECT_GE(kernel_value(k, r), lb - 1e-15) << r;
    EXPECT_NEAR(kernel_value(k, 1.0), lb, 1e-15);  // attained at the critical distance
  }
}

TEST(Kernel, SlopeVanishesAtOneForEveryPowerLaw) {
  for (double p : {-2.5, -1.0, -0.3, 0.7, 1.0, 2.0}) {
    for (double q : {2.2, 3.0, 4.5}) EXPECT_EQ(kernel_slope(PowerLawKernel{p, q}, 1.0), 0.0);
  }
}

TEST(Kernel, RepulsiveBlowUpNearOrigin) {
  const PowerLawKernel k{-0.5, 2.0};
  double prev = kernel_value(k, 0.9);
  for (double r = 0.5; r > 1e-10; r *= 0.1) {
    const double v = kernel_value(k, r);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(Kernel, SlopeMatchesCentralDifferences) {
  const double h = 1e-5;
  const std::vector<Kernel> kernels = {PowerLawKernel{-1.0, 2.0}, PowerLawKernel{-0.5, 1.5},
                                       PowerLawKernel{0.5, 3.7}, PowerLawKernel{2.0, 4.0}, ExponentialKernel{}};
  for (const auto& k : kernels) {
    for (double r = 0.1; r <= 10.0; r += 0.13) {
      const double fd = (kernel_value(k, r + h) - kernel_value(k, r - h)) / (2.0 * h);
      const double s = kernel_slope(k, r);
      EXPECT_LE(std::abs(s - fd), 1e-6 * (1.0 + std::abs(s))) << describe(k) << " r=" << r;
    }
  }
}

TEST(Kernel, NonIntegerExponentsAgreeWithPow) {
  const PowerLawKernel k{-0.7, 2.3};
  for (double r : {0.2, 1.3, 7.0}) {
    EXPECT_NEAR(kernel_value(k, r), std::pow(r, 2.3) / 2.3 + std::pow(r, -0.7) / 0.7, 1e-13 * kernel_value(k, r));
  }
}

TEST(Kernel, NewtonianDetection) {
  EXPECT_TRUE(is_newtonian_quadratic(PowerLawKernel{-1.0, 2.0}, 3));
  EXPECT_TRUE(is_newtonian_quadratic(PowerLawKernel{-2.0, 2.0}, 4));
  EXPECT_FALSE(is_newtonian_quadratic(PowerLawKernel{-1.0, 2.0}, 4));
  EXPECT_FALSE(is_newtonian_quadratic(ExponentialKernel{}, 3));
}

TEST(Confinement, Quadratic) {
  const auto f = Confinement::quadratic(1.0);
  const std::vector<double> x = {1.0, 0.0, 0.0};
  const auto e = confinement_eval(f, x);
  EXPECT_EQ(e.value, 1.0);
  EXPECT_EQ(e.gradient, (std::vector<double>{2.0, 0.0, 0.0}));
  const auto g = confinement_eval(Confinement::quadratic(0.5), std::vector<double>{0.0, 0.0, 0.0});
  EXPECT_EQ(g.value, 0.0);
  EXPECT_EQ(g.gradient, (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(Confinement, None) {
  const auto e = confinement_eval(Confinement::none(), std::vector<double>{3.0, -4.0});
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.gradient, (std::vector<double>{0.0, 0.0}));
}

TEST(Confinement, RejectsNegativeBeta) { EXPECT_THROW(Confinement::quadratic(-1.0), ConfigError); }
