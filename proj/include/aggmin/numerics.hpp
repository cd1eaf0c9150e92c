#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "aggmin/errors.hpp"

namespace aggmin {

/// Natural log of Gamma(x) for x > 0 (Lanczos, g = 7, nine terms; reflection
/// below 1/2). Absolute error is around 1e-15 on [0.1, 50].
inline double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("log_gamma: argument must be positive and finite, got " + std::to_string(x));
  }
  static constexpr double kG = 7.0;
  static constexpr std::array<double, 9> kCoef = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double pi = std::numbers::pi;
  if (x < 0.5) {
    // Gamma(x) Gamma(1 - x) = pi / sin(pi x); sin(pi x) > 0 on (0, 1/2).
    return std::log(pi / std::sin(pi * x)) - log_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  double a = kCoef[0];
  for (std::size_t i = 1; i < kCoef.size(); ++i) a += kCoef[i] / (z + static_cast<double>(i));
  const double t = z + kG + 0.5;
  return 0.5 * std::log(2.0 * pi) + (z + 0.5) * std::log(t) - t + std::log(a);
}

/// Volume of the unit ball in R^N, pi^{N/2} / Gamma(N/2 + 1).
inline double unit_ball_volume(int dim) {
  if (dim < 1) throw DomainError("unit_ball_volume: dimension must be >= 1");
  const double n = dim;
  return std::exp(0.5 * n * std::log(std::numbers::pi) - log_gamma(0.5 * n + 1.0));
}

/// Sharp Hardy-Littlewood-Sobolev constant C(gamma) for the diagonal case
///   \iint |x-y|^gamma rho(x) rho(y) <= C(gamma) ||rho||^2_{L^{2N/(2N+gamma)}},
/// valid for -N < gamma < 0.
inline double hls_sharp_constant(double gamma, int dim) {
  const double n = dim;
  if (dim < 1 || !(gamma > -n && gamma < 0.0)) {
    throw DomainError("hls_sharp_constant: need -N < gamma < 0, got gamma=" + std::to_string(gamma) +
                      " N=" + std::to_string(dim));
  }
  const double log_c = -0.5 * gamma * std::log(std::numbers::pi) + log_gamma(0.5 * n + 0.5 * gamma) -
                       log_gamma(n + 0.5 * gamma) +
                       (-1.0 - gamma / n) * (log_gamma(0.5 * n) - log_gamma(n));
  return std::exp(log_c);
}

/// Second-order Kahan-Babuska accumulator (Klein's variant). Partial
/// accumulators can be merged in a fixed order for deterministic reductions.
class CompensatedSum {
public:
  void add(double x) {
    double t = sum_ + x;
    double c = std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
    t = cs_ + c;
    const double cc = std::abs(cs_) >= std::abs(c) ? (cs_ - t) + c : (c - t) + cs_;
    cs_ = t;
    ccs_ += cc;
  }

  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }

  void merge(const CompensatedSum& other) {
    add(other.sum_);
    add(other.cs_);
    add(other.ccs_);
  }

  [[nodiscard]] double value() const { return sum_ + (cs_ + ccs_); }

private:
  double sum_ = 0.0;
  double cs_ = 0.0;
  double ccs_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericalFailure("compensated_sum: non-finite value at index " + std::to_string(i));
    }
    acc.add(values[i]);
  }
  return acc.value();
}

/// Weighted L2 projection onto {0 <= v_i <= cap, sum_i v_i w_i = target}.
///
/// The solution is v_i = clamp(values_i - lambda, 0, cap); lambda is located by
/// a bracketing search on the nonincreasing, piecewise-linear mass function
/// (bisection safeguarded by a Newton step on the current linear piece).
inline std::vector<double> project_capped_box(std::span<const double> values,
                                              std::span<const double> cell_masses, double cap,
                                              double target) {
  if (values.size() != cell_masses.size()) {
    throw ConfigError("project_capped_box: values and cell masses differ in length");
  }
  if (!(cap > 0.0) || !(target > 0.0)) {
    throw ConfigError("project_capped_box: cap and target mass must be positive");
  }
  CompensatedSum capacity_acc;
  for (double w : cell_masses) {
    if (!(w > 0.0)) throw ConfigError("project_capped_box: cell masses must be positive");
    capacity_acc.add(w * cap);
  }
  const double capacity = capacity_acc.value();
  if (capacity < target * (1.0 - 1e-12)) {
    throw ConfigError("project_capped_box: infeasible, capacity " + std::to_string(capacity) +
                      " < target mass " + std::to_string(target));
  }
  const std::size_t n = values.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(values[i])) throw NumericalFailure("project_capped_box: non-finite input");
  }

  auto mass_and_slope = [&](double lambda) {
    CompensatedSum mass;
    CompensatedSum free_weight;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = values[i] - lambda;
      if (u >= cap) {
        mass.add(cap * cell_masses[i]);
      } else if (u > 0.0) {
        mass.add(u * cell_masses[i]);
        free_weight.add(cell_masses[i]);
      }
    }
    return std::pair{mass.value(), free_weight.value()};
  };
  auto apply = [&](double lambda) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::clamp(values[i] - lambda, 0.0, cap);
    return out;
  };

  const double tol = 1e-13 * target;

  bool feasible = true;
  for (double v : values) feasible = feasible && v >= 0.0 && v <= cap;
  if (feasible) {
    CompensatedSum m0;
    for (std::size_t i = 0; i < n; ++i) m0.add(values[i] * cell_masses[i]);
    if (std::abs(m0.value() - target) <= tol) return {values.begin(), values.end()};
  }

  const auto [vmin, vmax] = std::minmax_element(values.begin(), values.end());
  double lo = *vmin - cap;  // mass(lo) = capacity >= target
  double hi = *vmax;        // mass(hi) = 0 < target
  double lambda = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const auto [mass, slope] = mass_and_slope(lambda);
    const double excess = mass - target;
    if (std::abs(excess) <= tol) break;
    if (excess > 0.0) {
      lo = lambda;
    } else {
      hi = lambda;
    }
    double next = 0.5 * (lo + hi);
    if (slope > 0.0) {
      const double newton = lambda + excess / slope;
      if (newton > lo && newton < hi) next = newton;
    }
    if (next == lambda || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                                          std::max({1.0, std::abs(lo), std::abs(hi)})) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return apply(lambda);
}

/// PCG32 (XSH-RR output on a 64-bit LCG state). Identical (seed, stream) pairs
/// produce identical sequences; independent workers use distinct streams.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), inc_((stream << 1u) | 1u) {
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((~rot + 1u) & 31u));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t a = next_u32() >> 5u;
    const std::uint64_t b = next_u32() >> 6u;
    return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) *
           (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one variate per call, no caching).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

private:
  std::uint64_t seed_;
  std::uint64_t state_ = 0;
  std::uint64_t inc_;
};

/// Uniform point in the closed unit ball of R^{out.size()}.
/// Rejection from the cube for N <= 3, radius-direction sampling above.
inline void sample_unit_ball(SeededRng& rng, std::span<double> out) {
  const std::size_t dim = out.size();
  if (dim == 0) throw DomainError("sample_unit_ball: dimension must be >= 1");
  if (dim <= 3) {
    for (;;) {
      double r2 = 0.0;
      for (double& c : out) {
        c = rng.uniform(-1.0, 1.0);
        r2 += c * c;
      }
      if (r2 <= 1.0) return;
    }
  }
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& c : out) {
      c = rng.normal();
      norm2 += c * c;
    }
  } while (norm2 == 0.0);
  const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
  const double scale = radius / std::sqrt(norm2);
  for (double& c : out) c *= scale;
}

inline std::vector<double> rng_sample_unit_ball(SeededRng& rng, int dim) {
  if (dim < 1) throw DomainError("rng_sample_unit_ball: dimension must be >= 1");
  std::vector<double> p(static_cast<std::size_t>(dim));
  sample_unit_ball(rng, p);
  return p;
}

}  // namespace aggmin
