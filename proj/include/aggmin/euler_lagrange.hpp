#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "aggmin/discretization.hpp"
#include "aggmin/energy.hpp"
#include "aggmin/errors.hpp"
#include "aggmin/numerics.hpp"
#include "aggmin/parallel.hpp"
#include "aggmin/potentials.hpp"

namespace aggmin {

/// Residuals of the first-order conditions psi = c0 on supp(rho), psi >= c0 off it.
struct ELReport {
  double c0 = 0.0;
  double on_support_sup = 0.0;
  double off_support_min = std::numeric_limits<double>::infinity();  // +inf if nothing is off support
  double support_threshold = 1e-3;
  double tol_abs = 0.0;
  std::size_t support_cells = 0;
  std::size_t off_support_samples = 0;
  bool pass = false;
};

inline constexpr double kDefaultSupportThreshold = 1e-3;
inline constexpr double kDefaultElRelTol = 1e-3;

/// c0 = \int psi rho / m with psi given at the state's own nodes.
inline double multiplier_c0(std::span<const double> rho, std::span<const double> weights,
                            std::span<const double> psi) {
  if (rho.size() != psi.size() || rho.size() != weights.size()) {
    throw DomainError("multiplier_c0: psi is not aligned with the state");
  }
  CompensatedSum num;
  CompensatedSum mass;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    num.add(weights[i] * rho[i] * psi[i]);
    mass.add(weights[i] * rho[i]);
  }
  if (!(mass.value() > 0.0)) throw DomainError("multiplier_c0: zero mass");
  return num.value() / mass.value();
}

template <class State>
double multiplier_c0(const State& d, const PsiField& psi) {
  return multiplier_c0(d.values(), d.weights(), psi.values);
}

inline double multiplier_c0(const ParticleEnsemble& e, const PsiField& psi) {
  return multiplier_c0(e.weights(), std::vector<double>(e.size(), 1.0), psi.values);
}

namespace detail {

inline ELReport finish_el(ELReport rep, std::optional<double> tol_abs) {
  rep.tol_abs = tol_abs.value_or(kDefaultElRelTol * std::abs(rep.c0));
  rep.pass = rep.on_support_sup <= rep.tol_abs && rep.off_support_min >= -rep.tol_abs;
  return rep;
}

// Two sample points per off-support cell, at its quarter points.
template <class State, class Coord>
std::vector<double> refined_off_support(const State& d, const std::vector<bool>& in_support, Coord&& lower_of) {
  std::vector<double> pts;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (in_support[i]) continue;
    const double lo = lower_of(i);
    const double h = 2.0 * (d.node(i) - lo);
    pts.push_back(lo + 0.25 * h);
    pts.push_back(lo + 0.75 * h);
  }
  return pts;
}

template <class State>
ELReport el_verify_grid(const State& d, const Kernel& kernel, const Confinement& f, double threshold,
                        std::optional<double> tol_abs, Workers workers, const std::vector<double>& refined_psi) {
  const auto psi = psi_on_cells(d, kernel, f, workers);
  ELReport rep;
  rep.support_threshold = threshold;
  rep.c0 = multiplier_c0(d, psi);
  const auto v = d.values();
  const double vmax = *std::max_element(v.begin(), v.end());
  double on = 0.0;
  double off = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = psi.values[i] - rep.c0;
    if (v[i] >= threshold * vmax) {
      on = std::max(on, std::abs(r));
      ++rep.support_cells;
    } else {
      off = std::min(off, r);
      ++rep.off_support_samples;
    }
  }
  for (double p : refined_psi) {
    off = std::min(off, p - rep.c0);
    ++rep.off_support_samples;
  }
  rep.on_support_sup = on;
  rep.off_support_min = off;
  return finish_el(rep, tol_abs);
}

template <class State>
std::vector<bool> support_mask(const State& d, double threshold) {
  const auto v = d.values();
  const double vmax = *std::max_element(v.begin(), v.end());
  if (!(vmax > 0.0)) throw DomainError("el_verify: zero density has no support");
  std::vector<bool> mask(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) mask[i] = v[i] >= threshold * vmax;
  return mask;
}

}  // namespace detail

/// psi on cells (cell averages on radial grids, node values on line grids),
/// plus pointwise psi at a 2x refined sample of the off-support cells.
inline ELReport el_verify(const RadialDensity& d, const Kernel& kernel, const Confinement& f,
                          double threshold = kDefaultSupportThreshold, std::optional<double> tol_abs = std::nullopt,
                          Workers workers = {}) {
  const auto mask = detail::support_mask(d, threshold);
  const auto pts = detail::refined_off_support(d, mask, [&](std::size_t i) { return d.grid().lower(i); });
  const auto refined = psi_field(d, kernel, f, pts);
  return detail::el_verify_grid(d, kernel, f, threshold, tol_abs, workers, refined.values);
}

inline ELReport el_verify(const LineDensity& d, const Kernel& kernel, const Confinement& f,
                          double threshold = kDefaultSupportThreshold, std::optional<double> tol_abs = std::nullopt,
                          Workers workers = {}) {
  const auto mask = detail::support_mask(d, threshold);
  const auto pts = detail::refined_off_support(d, mask, [&](std::size_t i) { return d.lower(i); });
  const auto refined = psi_field(d, kernel, f, pts);
  return detail::el_verify_grid(d, kernel, f, threshold, tol_abs, workers, refined.values);
}

inline ELReport el_verify(const DensityState& s, const Kernel& kernel, const Confinement& f,
                          double threshold = kDefaultSupportThreshold, std::optional<double> tol_abs = std::nullopt,
                          Workers workers = {}) {
  return std::visit([&](const auto& d) { return el_verify(d, kernel, f, threshold, tol_abs, workers); }, s);
}

/// Every particle is on the support; psi_i excludes the self term. There is no
/// off-support sample, so off_support_min is +inf.
inline ELReport el_verify(const ParticleEnsemble& e, const Kernel& kernel, const Confinement& f,
                          double threshold = kDefaultSupportThreshold, std::optional<double> tol_abs = std::nullopt,
                          Workers workers = {}) {
  const auto psi = particle_psi(e, kernel, f, workers);
  ELReport rep;
  rep.support_threshold = threshold;
  rep.c0 = multiplier_c0(e.weights(), std::vector<double>(e.size(), 1.0), psi);
  for (double p : psi) rep.on_support_sup = std::max(rep.on_support_sup, std::abs(p - rep.c0));
  rep.support_cells = e.size();
  return detail::finish_el(rep, tol_abs);
}

}  // namespace aggmin
