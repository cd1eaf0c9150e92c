#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aggmin/discretization.hpp"
#include "aggmin/energy.hpp"
#include "aggmin/errors.hpp"
#include "aggmin/numerics.hpp"
#include "aggmin/parallel.hpp"
#include "aggmin/potentials.hpp"

namespace aggmin {

struct SolverConfig {
  int max_iters = 20000;
  double step0 = 0.1;
  double armijo_shrink = 0.5;
  double armijo_slope = 1e-4;
  double tol_energy = 1e-12;
  // Particles: absolute bound on sqrt(sum m_i |V_i|^2). Densities: the
  // projected-gradient norm is compared against tol_residual * max(1, |c0|).
  double tol_residual = 1e-8;

  static SolverConfig particle_defaults() { return {}; }

  static SolverConfig density_defaults() {
    SolverConfig c;
    c.tol_residual = 1e-6;
    return c;
  }

  void validate() const {
    std::string bad;
    if (max_iters < 1) bad += " max_iters must be >= 1;";
    if (!(step0 > 0.0) || !std::isfinite(step0)) bad += " step0 must be positive;";
    if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) bad += " armijo_shrink must lie in (0,1);";
    if (!(armijo_slope > 0.0 && armijo_slope < 1.0)) bad += " armijo_slope must lie in (0,1);";
    if (!(tol_energy > 0.0)) bad += " tol_energy must be positive;";
    if (!(tol_residual > 0.0)) bad += " tol_residual must be positive;";
    if (!bad.empty()) throw ConfigError("solver config:" + bad);
  }

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

enum class Termination { energy_tol, residual_tol, max_iters };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::energy_tol: return "energy_tol";
    case Termination::residual_tol: return "residual_tol";
    case Termination::max_iters: return "max_iters";
  }
  return "unknown";
}

struct TraceEntry {
  int iter = 0;
  double energy = 0.0;
  double step = 0.0;  // accepted step length; 0 for the initial entry
  double residual = 0.0;
  double mass = 0.0;
};

/// Entry 0 is the initial state; every later entry is an accepted step.
struct Trace {
  std::vector<TraceEntry> entries;
  Termination reason = Termination::max_iters;
};

struct ConvergenceReport {
  double final_energy = 0.0;
  int iterations = 0;
  Termination reason = Termination::max_iters;
  bool monotone = true;
  double mass_drift = 0.0;  // |final mass - initial mass| / initial mass
  double final_residual = 0.0;
};

inline ConvergenceReport convergence_report(const Trace& trace) {
  if (trace.entries.empty()) throw DomainError("convergence_report: empty trace");
  ConvergenceReport rep;
  const auto& first = trace.entries.front();
  const auto& last = trace.entries.back();
  rep.final_energy = last.energy;
  rep.iterations = last.iter;
  rep.reason = trace.reason;
  rep.final_residual = last.residual;
  for (std::size_t i = 1; i < trace.entries.size(); ++i) {
    if (!(trace.entries[i].energy <= trace.entries[i - 1].energy)) rep.monotone = false;
  }
  rep.mass_drift = first.mass != 0.0 ? std::abs(last.mass - first.mass) / std::abs(first.mass)
                                     : std::abs(last.mass);
  return rep;
}

namespace detail {

// Next trial step after an accepted one: the Barzilai-Borwein ratio <s,s>/<s,y>
// when the curvature is positive, otherwise a doubling. Kept within a wide
// window around step0.
inline double next_step(double ss, double sy, double accepted, double step0) {
  const double raw = sy > 0.0 ? ss / sy : 2.0 * accepted;
  return std::clamp(raw, 1e-10 * step0, 1e10 * step0);
}

inline constexpr std::size_t kEnergyWindow = 10;

// Relative energy decrease over the last kEnergyWindow accepted steps. A
// window rather than a single step, because step-size sequences of the BB
// type interleave very short steps with productive ones.
inline bool energy_stalled(const Trace& trace, double tol) {
  const auto& e = trace.entries;
  if (e.size() <= kEnergyWindow) return false;
  const double now = e.back().energy;
  const double then = e[e.size() - 1 - kEnergyWindow].energy;
  return then - now <= tol * std::max(std::abs(now), std::numeric_limits<double>::min());
}

inline double weighted_dot(std::span<const double> w, std::span<const double> a, std::span<const double> b) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc.add(w[i] * a[i] * b[i]);
  return acc.value();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Particle gradient flow
// ---------------------------------------------------------------------------

struct ParticleFlowResult {
  ParticleEnsemble final;
  Trace trace;
};

/// Explicit Euler steps x_i <- x_i + tau V_i, each accepted only if the energy
/// drops by at least armijo_slope * tau * sum m_i |V_i|^2.
inline ParticleFlowResult particle_flow(const ParticleEnsemble& start, const Kernel& kernel, const Confinement& f,
                                        const SolverConfig& cfg, Workers workers = {}) {
  cfg.validate();
  ParticleEnsemble x = start;
  const std::size_t n = x.size();
  const auto nd = static_cast<std::size_t>(x.dim());
  auto weighted_norm_sq = [&](std::span<const double> v) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < nd; ++d) acc.add(x.weight(i) * v[i * nd + d] * v[i * nd + d]);
    }
    return acc.value();
  };

  double energy = particle_energy(x, kernel, f, workers).total;
  auto v = particle_velocity(x, kernel, f, workers);
  double vnorm2 = weighted_norm_sq(v);
  const double mass = x.total_mass();

  Trace trace;
  trace.entries.push_back({0, energy, 0.0, std::sqrt(vnorm2), mass});
  double tau = cfg.step0;
  for (int iter = 1;; ++iter) {
    if (std::sqrt(vnorm2) <= cfg.tol_residual) {
      trace.reason = Termination::residual_tol;
      break;
    }
    if (iter > cfg.max_iters) {
      trace.reason = Termination::max_iters;
      break;
    }
    std::optional<ParticleEnsemble> trial;
    double delta = 0.0;
    for (;;) {
      if (tau < 1e-16 * cfg.step0) {
        throw NonConvergence("particle_flow: step underflow at iteration " + std::to_string(iter));
      }
      std::vector<double> pos(x.positions().begin(), x.positions().end());
      for (std::size_t k = 0; k < pos.size(); ++k) pos[k] += tau * v[k];
      ParticleEnsemble cand(x.dim(), std::move(pos), std::vector<double>(x.weights().begin(), x.weights().end()));
      try {
        delta = particle_energy_change(x, cand, kernel, f, workers);
      } catch (const NumericalFailure&) {
        tau *= 0.5;  // collision inside the trial step
        continue;
      }
      if (std::isfinite(delta) && delta < 0.0 && delta <= -cfg.armijo_slope * tau * vnorm2) {
        trial = std::move(cand);
        break;
      }
      tau *= cfg.armijo_shrink;
    }
    const auto v_new = particle_velocity(*trial, kernel, f, workers);
    // BB in the mass-weighted metric: s = tau V, y = -(V_new - V).
    CompensatedSum ss;
    CompensatedSum sy;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < nd; ++d) {
        const std::size_t k = i * nd + d;
        const double s = tau * v[k];
        ss.add(x.weight(i) * s * s);
        sy.add(-x.weight(i) * s * (v_new[k] - v[k]));
      }
    }
    const double accepted = tau;
    x = std::move(*trial);
    v = v_new;
    vnorm2 = weighted_norm_sq(v);
    energy += delta;
    trace.entries.push_back({iter, energy, accepted, std::sqrt(vnorm2), mass});
    if (detail::energy_stalled(trace, cfg.tol_energy)) {
      trace.reason = std::sqrt(vnorm2) <= cfg.tol_residual ? Termination::residual_tol : Termination::energy_tol;
      break;
    }
    tau = detail::next_step(ss.value(), sy.value(), accepted, cfg.step0);
  }
  return {std::move(x), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Projected gradient descent on grid densities
// ---------------------------------------------------------------------------

template <class State>
struct DensityMinimizeResult {
  State final;
  Trace trace;
};

/// Iterates rho <- P(rho - tau psi[rho]) over {0 <= rho <= M, mass = m} with
/// Armijo backtracking. Energy differences use the exact quadratic expansion
/// E(rho + d) - E(rho) = <psi, d> + 1/2 <K*d, d>, so descent is certified
/// even when the change is far below the energy's rounding level.
template <class State>
DensityMinimizeResult<State> density_minimize(const State& start, const Kernel& kernel, const Confinement& f,
                                              double target_mass, const SolverConfig& cfg, Workers workers = {}) {
  cfg.validate();
  if (!(target_mass > 0.0)) throw ConfigError("density_minimize: target mass must be positive");
  const auto w = start.weights();
  const double cap = start.cap();
  {
    CompensatedSum capacity;
    for (double wi : w) capacity.add(wi * cap);
    if (capacity.value() < target_mass * (1.0 - 1e-12)) {
      throw ConfigError("density_minimize: infeasible constraint, capacity M*|domain| = " +
                        std::to_string(capacity.value()) + " < m = " + std::to_string(target_mass));
    }
  }
  const std::size_t n = start.size();
  const auto conf = cell_confinement(start, f);
  auto potential = [&](std::span<const double> rho) {
    auto psi = cell_interaction_potential(start, rho, kernel, workers);
    for (std::size_t i = 0; i < n; ++i) psi[i] += conf[i];
    return psi;
  };
  auto project = [&](std::span<const double> v) { return project_capped_box(v, w, cap, target_mass); };

  std::vector<double> rho = project(start.values());
  std::vector<double> psi = potential(rho);
  double energy = density_energy(start.with_values(rho), kernel, f, workers).total;
  auto mass_of = [&](std::span<const double> v) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < n; ++i) acc.add(w[i] * v[i]);
    return acc.value();
  };
  auto residual_of = [&](std::span<const double> r, std::span<const double> p) {
    std::vector<double> shifted(n);
    for (std::size_t i = 0; i < n; ++i) shifted[i] = r[i] - cfg.step0 * p[i];
    const auto pr = project(shifted);
    CompensatedSum acc;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = (r[i] - pr[i]) / cfg.step0;
      acc.add(w[i] * g * g);
    }
    return std::sqrt(acc.value());
  };
  auto c0_of = [&](std::span<const double> r, std::span<const double> p) {
    return detail::weighted_dot(w, r, p) / target_mass;
  };

  Trace trace;
  double residual = residual_of(rho, psi);
  trace.entries.push_back({0, energy, 0.0, residual, mass_of(rho)});
  double tau = cfg.step0;
  std::vector<double> trial(n);
  std::vector<double> d(n);
  for (int iter = 1;; ++iter) {
    if (residual <= cfg.tol_residual * std::max(1.0, std::abs(c0_of(rho, psi)))) {
      trace.reason = Termination::residual_tol;
      break;
    }
    if (iter > cfg.max_iters) {
      trace.reason = Termination::max_iters;
      break;
    }
    double delta = 0.0;
    double curvature = 0.0;
    const double c0 = c0_of(rho, psi);
    std::vector<double> kd;
    for (;;) {
      if (tau < 1e-16 * cfg.step0) {
        throw NonConvergence("density_minimize: step underflow at iteration " + std::to_string(iter));
      }
      for (std::size_t i = 0; i < n; ++i) trial[i] = rho[i] - tau * psi[i];
      trial = project(trial);
      for (std::size_t i = 0; i < n; ++i) d[i] = trial[i] - rho[i];
      kd = cell_interaction_potential(start, d, kernel, workers);
      // d has zero mass up to the projection's tolerance; measuring psi from
      // c0 keeps that residual mass from swamping tiny descents.
      double slope = 0.0;
      {
        CompensatedSum acc;
        for (std::size_t i = 0; i < n; ++i) acc.add(w[i] * (psi[i] - c0) * d[i]);
        slope = acc.value();
      }
      curvature = detail::weighted_dot(w, kd, d);
      delta = slope + 0.5 * curvature;
      if (!std::isfinite(delta)) throw NumericalFailure("density_minimize: non-finite energy change");
      if (delta < 0.0 && delta <= cfg.armijo_slope * slope) break;
      tau *= cfg.armijo_shrink;
    }
    const double accepted = tau;
    const double ss = detail::weighted_dot(w, d, d);
    rho.swap(trial);
    psi = potential(rho);
    energy += delta;
    residual = residual_of(rho, psi);
    trace.entries.push_back({iter, energy, accepted, residual, mass_of(rho)});
    if (detail::energy_stalled(trace, cfg.tol_energy)) {
      trace.reason = residual <= cfg.tol_residual * std::max(1.0, std::abs(c0_of(rho, psi)))
                         ? Termination::residual_tol
                         : Termination::energy_tol;
      break;
    }
    tau = detail::next_step(ss, curvature, accepted, cfg.step0);
  }
  return {start.with_values(std::move(rho)), std::move(trace)};
}

}  // namespace aggmin
