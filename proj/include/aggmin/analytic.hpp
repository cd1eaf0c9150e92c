#pragma once

#include <cmath>
#include <string>

#include "aggmin/errors.hpp"
#include "aggmin/numerics.hpp"

namespace aggmin {

/// The uniform-ball global minimizer for K = r^2/2 + r^{2-N}/(N-2), F = beta |x|^2.
struct BallSolution {
  int dim = 3;
  double mass = 1.0;
  double beta = 1.0;
  double r0 = 0.0;
  double height = 0.0;
  double c0 = 0.0;
};

namespace detail {

inline void check_ball_args(int dim, double m, double beta, const char* what) {
  if (dim <= 2) throw DomainError(std::string(what) + ": need N > 2");
  if (!(m > 0.0) || !std::isfinite(m)) throw DomainError(std::string(what) + ": mass must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError(std::string(what) + ": beta must be >= 0");
}

inline double ball_tail_constant(double n, double m, double beta) {
  const double ratio = m / (m + 2.0 * beta);
  return n * (m + 2.0 * beta) / (2.0 * (n + 2.0)) * std::pow(ratio, (n + 2.0) / n);
}

}  // namespace detail

/// psi on the ball, the value it takes throughout the support.
inline double ball_c0(int dim, double m, double beta) {
  detail::check_ball_args(dim, m, beta, "ball_c0");
  const double n = dim;
  const double ratio = m / (m + 2.0 * beta);
  return detail::ball_tail_constant(n, m, beta) + n * (m + 2.0 * beta) / (2.0 * (n - 2.0)) * std::pow(ratio, 2.0 / n);
}

inline BallSolution ball_solution(int dim, double m, double beta) {
  detail::check_ball_args(dim, m, beta, "ball_solution");
  const double n = dim;
  BallSolution s;
  s.dim = dim;
  s.mass = m;
  s.beta = beta;
  s.r0 = std::pow(m / (m + 2.0 * beta), 1.0 / n);
  s.height = (m + 2.0 * beta) / unit_ball_volume(dim);
  s.c0 = ball_c0(dim, m, beta);
  return s;
}

/// Normalized Poisson potential of the ball: -Delta phi = 1 inside r0, 0 outside.
inline double ball_phi(double r, int dim, double m, double beta) {
  detail::check_ball_args(dim, m, beta, "ball_phi");
  if (!(r >= 0.0)) throw DomainError("ball_phi: radius must be >= 0");
  const double n = dim;
  const double ratio = m / (m + 2.0 * beta);
  const double r0 = std::pow(ratio, 1.0 / n);
  if (r <= r0) return -r * r / (2.0 * n) + std::pow(ratio, 2.0 / n) / (2.0 * (n - 2.0));
  return ratio / (n * (n - 2.0)) * std::pow(r, 2.0 - n);
}

/// psi = K * rho0 + F for the ball minimizer rho0.
inline double ball_psi(double r, int dim, double m, double beta) {
  detail::check_ball_args(dim, m, beta, "ball_psi");
  if (!(r >= 0.0)) throw DomainError("ball_psi: radius must be >= 0");
  const double n = dim;
  const double r0 = std::pow(m / (m + 2.0 * beta), 1.0 / n);
  if (r <= r0) return ball_c0(dim, m, beta);
  return 0.5 * m * r * r + m / (n - 2.0) * std::pow(r, 2.0 - n) + beta * r * r +
         detail::ball_tail_constant(n, m, beta);
}

/// E[rho0] = 1/2 m c0 + 1/2 \int F rho0.
inline double ball_energy(int dim, double m, double beta) {
  const auto s = ball_solution(dim, m, beta);
  const double n = dim;
  const double conf = beta * m * n / (n + 2.0) * s.r0 * s.r0;
  return 0.5 * m * s.c0 + 0.5 * conf;
}

/// Support half-width of the 1D minimizer for K = exp(-|x|), F = beta x^2.
inline double bt_support(double m, double beta) {
  if (!(m > 0.0) || !(beta > 0.0)) throw DomainError("bt_support: need m > 0 and beta > 0");
  return std::cbrt(1.5 * m / beta + 1.0) - 1.0;
}

inline double bt_profile(double m, double beta, double x) {
  const double l = bt_support(m, beta);
  if (std::abs(x) > l) return 0.0;
  return 0.5 * beta * ((1.0 + l) * (1.0 + l) + 1.0 - x * x);
}

/// Half-separation a of the symmetric equilibrium of two atoms of mass m/2
/// for q = 2, p = -1 in R^3: (m/2) K'(2a) + 2 beta a = 0.
inline double two_particle_equilibrium(double m, double beta) {
  if (!(m > 0.0) || !(beta >= 0.0)) throw DomainError("two_particle_equilibrium: need m > 0 and beta >= 0");
  return 0.5 * std::cbrt(m / (m + 2.0 * beta));
}

/// (m/2) K'(2a) + 2 beta a for K'(r) = r - r^{-2}.
inline double two_particle_force_balance(double m, double beta, double a) {
  const double r = 2.0 * a;
  return 0.5 * m * (r - 1.0 / (r * r)) + 2.0 * beta * a;
}

}  // namespace aggmin
