#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "aggmin/discretization.hpp"
#include "aggmin/errors.hpp"
#include "aggmin/numerics.hpp"
#include "aggmin/parallel.hpp"
#include "aggmin/potentials.hpp"

namespace aggmin {

struct EnergyBreakdown {
  double interaction = 0.0;  // 1/2 \iint K rho rho
  double confinement = 0.0;  // \int F rho
  double total = 0.0;
};

/// psi = K * rho + F sampled at a list of points (N-vectors for particles,
/// radii for radial states, abscissae for line states).
struct PsiField {
  std::vector<std::vector<double>> points;
  std::vector<double> values;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double r2 = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double t = a[d] - b[d];
    r2 += t * t;
  }
  return r2;
}

// Whether K(r) stays finite (and is set to its limit) as r -> 0.
inline bool kernel_finite_at_origin(const Kernel& k) {
  if (const auto* pl = std::get_if<PowerLawKernel>(&k)) return pl->p > 0.0;
  return true;
}

inline double kernel_value_at_origin(const Kernel& k) {
  return std::holds_alternative<ExponentialKernel>(k) ? 1.0 : 0.0;
}

// Whether K'(r) x/r -> 0 as r -> 0 (so coincident particles exert no force).
inline bool kernel_force_vanishes_at_origin(const Kernel& k) {
  if (const auto* pl = std::get_if<PowerLawKernel>(&k)) return pl->p > 1.0;
  return false;
}

// K(r + dr) - K(r) without cancellation for small dr.
inline double kernel_value_change(const Kernel& k, double r, double dr) {
  if (dr == 0.0) return 0.0;
  if (std::holds_alternative<ExponentialKernel>(k)) return std::exp(-r) * std::expm1(-dr);
  const auto& pl = std::get<PowerLawKernel>(k);
  const double rel = std::log1p(dr / r);
  return power(r, pl.q) * std::expm1(pl.q * rel) / pl.q - power(r, pl.p) * std::expm1(pl.p * rel) / pl.p;
}

// Canonical particle order: lexicographic in position, then weight. Pair sums
// over this order do not depend on how the caller listed the particles.
inline std::vector<std::size_t> canonical_order(const ParticleEnsemble& e) {
  std::vector<std::size_t> idx(e.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto xa = e.position(a);
    const auto xb = e.position(b);
    for (std::size_t d = 0; d < xa.size(); ++d) {
      if (xa[d] != xb[d]) return xa[d] < xb[d];
    }
    return e.weight(a) < e.weight(b);
  });
  return idx;
}

[[noreturn]] inline void throw_collision(std::size_t i, std::size_t j, const char* what) {
  throw NumericalFailure(std::string(what) + ": particles " + std::to_string(std::min(i, j)) + " and " +
                         std::to_string(std::max(i, j)) + " coincide under a singular kernel");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Particle ensembles
// ---------------------------------------------------------------------------

/// interaction = sum_{i<j} m_i m_j K(|x_i - x_j|), confinement = sum_i m_i F(x_i).
inline EnergyBreakdown particle_energy(const ParticleEnsemble& e, const Kernel& kernel,
                                       const Confinement& f, Workers workers = {}) {
  const auto order = detail::canonical_order(e);
  const std::size_t n = e.size();
  std::vector<CompensatedSum> partial(chunk_count(n));
  const bool finite0 = detail::kernel_finite_at_origin(kernel);
  const double k0 = detail::kernel_value_at_origin(kernel);
  for_each_chunk(n, workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    CompensatedSum acc;
    for (std::size_t a = begin; a < end; ++a) {
      const std::size_t i = order[a];
      const auto xi = e.position(i);
      for (std::size_t b = a + 1; b < n; ++b) {
        const std::size_t j = order[b];
        const double r = std::sqrt(detail::squared_distance(xi, e.position(j)));
        double k = 0.0;
        if (r < detail::kSingularRadius) {
          if (!finite0) detail::throw_collision(i, j, "particle_energy");
          k = r == 0.0 ? k0 : kernel_value(kernel, r);
        } else {
          k = kernel_value(kernel, r);
        }
        acc.add(e.weight(i) * e.weight(j) * k);
      }
    }
    partial[c] = acc;
  });
  CompensatedSum inter;
  for (const auto& p : partial) inter.merge(p);
  CompensatedSum conf;
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t i = order[a];
    conf.add(e.weight(i) * f.value(e.position(i)));
  }
  EnergyBreakdown out{inter.value(), conf.value(), 0.0};
  out.total = out.interaction + out.confinement;
  if (!std::isfinite(out.total)) throw NumericalFailure("particle_energy: non-finite energy");
  return out;
}

/// E[to] - E[from] for two ensembles with the same particles, computed from
/// coordinate differences so that small steps keep full relative accuracy.
inline double particle_energy_change(const ParticleEnsemble& from, const ParticleEnsemble& to,
                                     const Kernel& kernel, const Confinement& f, Workers workers = {}) {
  if (from.size() != to.size() || from.dim() != to.dim()) {
    throw DomainError("particle_energy_change: ensembles differ in shape");
  }
  const std::size_t n = from.size();
  const auto nd = static_cast<std::size_t>(from.dim());
  const auto order = detail::canonical_order(from);
  const bool finite0 = detail::kernel_finite_at_origin(kernel);
  std::vector<CompensatedSum> partial(chunk_count(n));
  for_each_chunk(n, workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    CompensatedSum acc;
    std::vector<double> sep(nd);
    std::vector<double> dsep(nd);
    for (std::size_t a = begin; a < end; ++a) {
      const std::size_t i = order[a];
      const auto xi = from.position(i);
      const auto yi = to.position(i);
      for (std::size_t b = a + 1; b < n; ++b) {
        const std::size_t j = order[b];
        const auto xj = from.position(j);
        const auto yj = to.position(j);
        double r2 = 0.0;
        double r2_new = 0.0;
        double dr2 = 0.0;
        for (std::size_t d = 0; d < nd; ++d) {
          const double s = xi[d] - xj[d];
          const double ds = (yi[d] - xi[d]) - (yj[d] - xj[d]);
          const double t = yi[d] - yj[d];
          r2 += s * s;
          r2_new += t * t;
          dr2 += ds * (2.0 * s + ds);
        }
        const double r = std::sqrt(r2);
        const double r_new = std::sqrt(r2_new);
        if (r < detail::kSingularRadius || r_new < detail::kSingularRadius) {
          if (!finite0) detail::throw_collision(i, j, "particle_energy_change");
          const double k_old = r == 0.0 ? 0.0 : kernel_value(kernel, r);
          const double k_new = r_new == 0.0 ? 0.0 : kernel_value(kernel, r_new);
          acc.add(from.weight(i) * from.weight(j) * (k_new - k_old));
          continue;
        }
        const double dr = dr2 / (r + r_new);
        acc.add(from.weight(i) * from.weight(j) * detail::kernel_value_change(kernel, r, dr));
      }
    }
    partial[c] = acc;
  });
  CompensatedSum total;
  for (const auto& p : partial) total.merge(p);
  const double beta = f.beta();
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = from.position(i);
    const auto y = to.position(i);
    double dr2 = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      const double dx = y[d] - x[d];
      dr2 += dx * (2.0 * x[d] + dx);
    }
    total.add(from.weight(i) * beta * dr2);
  }
  return total.value();
}

/// V_i = -sum_{j != i} m_j K'(r_ij) (x_i - x_j) / r_ij - grad F(x_i), row-major.
inline std::vector<double> particle_velocity(const ParticleEnsemble& e, const Kernel& kernel,
                                             const Confinement& f, Workers workers = {}) {
  const std::size_t n = e.size();
  const auto nd = static_cast<std::size_t>(e.dim());
  const bool force0 = detail::kernel_force_vanishes_at_origin(kernel);
  std::vector<double> v(n * nd, 0.0);
  for_each_chunk(n, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<CompensatedSum> acc(nd);
    std::vector<double> grad(nd);
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(acc.begin(), acc.end(), CompensatedSum{});
      const auto xi = e.position(i);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const auto xj = e.position(j);
        const double r = std::sqrt(detail::squared_distance(xi, xj));
        if (r < detail::kSingularRadius) {
          if (force0) continue;
          detail::throw_collision(i, j, "particle_velocity");
        }
        const double s = e.weight(j) * kernel_slope(kernel, r) / r;
        for (std::size_t d = 0; d < nd; ++d) acc[d].add(-s * (xi[d] - xj[d]));
      }
      f.gradient(xi, grad);
      for (std::size_t d = 0; d < nd; ++d) {
        acc[d].add(-grad[d]);
        v[i * nd + d] = acc[d].value();
      }
    }
  });
  return v;
}

/// psi(y) = sum_j m_j K(|y - x_j|) + F(y) at arbitrary points.
inline PsiField psi_field(const ParticleEnsemble& e, const Kernel& kernel, const Confinement& f,
                          std::span<const std::vector<double>> points) {
  PsiField out;
  out.points.assign(points.begin(), points.end());
  out.values.reserve(points.size());
  const bool finite0 = detail::kernel_finite_at_origin(kernel);
  for (const auto& y : points) {
    if (y.size() != static_cast<std::size_t>(e.dim())) throw DomainError("psi_field: point has wrong dimension");
    CompensatedSum acc;
    for (std::size_t j = 0; j < e.size(); ++j) {
      const double r = std::sqrt(detail::squared_distance(y, e.position(j)));
      if (r < detail::kSingularRadius) {
        if (!finite0) throw NumericalFailure("psi_field: evaluation point coincides with particle " + std::to_string(j));
        acc.add(e.weight(j) * (r == 0.0 ? detail::kernel_value_at_origin(kernel) : kernel_value(kernel, r)));
        continue;
      }
      acc.add(e.weight(j) * kernel_value(kernel, r));
    }
    acc.add(f.value(y));
    out.values.push_back(acc.value());
  }
  return out;
}

/// psi at each particle, excluding the self term.
inline std::vector<double> particle_psi(const ParticleEnsemble& e, const Kernel& kernel,
                                        const Confinement& f, Workers workers = {}) {
  const std::size_t n = e.size();
  std::vector<double> out(n);
  const bool finite0 = detail::kernel_finite_at_origin(kernel);
  for_each_chunk(n, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      CompensatedSum acc;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double r = std::sqrt(detail::squared_distance(e.position(i), e.position(j)));
        if (r < detail::kSingularRadius) {
          if (!finite0) detail::throw_collision(i, j, "particle_psi");
          acc.add(e.weight(j) * (r == 0.0 ? detail::kernel_value_at_origin(kernel) : kernel_value(kernel, r)));
          continue;
        }
        acc.add(e.weight(j) * kernel_value(kernel, r));
      }
      acc.add(f.value(e.position(i)));
      out[i] = acc.value();
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Radial densities (Newtonian-quadratic kernel, N > 2)
// ---------------------------------------------------------------------------

namespace detail {

inline void require_newtonian(const Kernel& kernel, int dim, const char* what) {
  if (!is_newtonian_quadratic(kernel, dim)) {
    throw UnsupportedKernel(std::string(what) + ": radial states support only q = 2, p = 2 - N (N > 2); got " +
                            describe(kernel) + " with N = " + std::to_string(dim));
  }
}

// (1/(N-2)) * sum_j rho_j \iint_{cell_i x cell_j} max(|x|,|y|)^{2-N} / V_i:
// the cell average of the Newtonian part of K * rho over cell i.
inline std::vector<double> radial_newton_cell_potential(const RadialGrid& g, std::span<const double> rho) {
  const std::size_t n = g.size();
  const auto vol = g.volumes();
  const auto outer_w = g.newton_outer();
  const auto self = g.newton_self();
  std::vector<double> outer(n, 0.0);
  {
    CompensatedSum acc;
    for (std::size_t k = n; k-- > 0;) {
      outer[k] = acc.value();
      acc.add(rho[k] * outer_w[k]);
    }
  }
  const double coef = 1.0 / (g.dim() - 2.0);
  std::vector<double> out(n);
  CompensatedSum inner;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = g.lower(i);
    const double b = g.upper(i);
    // S_i / V_i and the averaged interior weight of shell i.
    const double shell_pot = outer_w[i] / vol[i];
    CompensatedSum acc;
    acc.add(rho[i] * self[i] / vol[i]);
    acc.add(shell_pot * inner.value());
    acc.add(outer[i]);
    out[i] = coef * acc.value();
    inner.add(rho[i] * vol[i]);
    (void)a;
    (void)b;
  }
  return out;
}

struct RadialTotals {
  double mass = 0.0;
  double second_moment = 0.0;
};

inline RadialTotals radial_totals(const RadialGrid& g, std::span<const double> rho) {
  CompensatedSum m;
  CompensatedSum m2;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    m.add(rho[i] * g.volumes()[i]);
    m2.add(rho[i] * g.second_moments()[i]);
  }
  return {m.value(), m2.value()};
}

}  // namespace detail

/// Cell averages of K * rho (interaction part of psi) for the Newtonian-quadratic
/// kernel. Linear in `rho`, which may have any sign.
inline std::vector<double> radial_cell_interaction_potential(const RadialGrid& g, std::span<const double> rho) {
  auto out = detail::radial_newton_cell_potential(g, rho);
  const auto t = detail::radial_totals(g, rho);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += 0.5 * (t.second_moment + t.mass * g.second_moments()[i] / g.volumes()[i]);
  }
  return out;
}

/// Cell averages of F.
inline std::vector<double> radial_cell_confinement(const RadialGrid& g, const Confinement& f) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.beta() * g.second_moments()[i] / g.volumes()[i];
  return out;
}

/// Pointwise K * rho at radius r for a radial piecewise-constant rho, via the
/// shell theorem. Prefix sums make each evaluation O(log G).
class RadialPotentialEvaluator {
public:
  RadialPotentialEvaluator(const RadialDensity& d, const Kernel& kernel) : grid_(d.grid_ptr()) {
    detail::require_newtonian(kernel, d.dim(), "radial_interaction_potential");
    const auto v = d.values();
    values_.assign(v.begin(), v.end());
    const std::size_t n = v.size();
    inner_.assign(n + 1, 0.0);
    outer_.assign(n + 1, 0.0);
    CompensatedSum in;
    for (std::size_t i = 0; i < n; ++i) {
      in.add(v[i] * grid_->volumes()[i]);
      inner_[i + 1] = in.value();
    }
    CompensatedSum out;
    for (std::size_t i = n; i-- > 0;) {
      out.add(v[i] * grid_->newton_outer()[i]);
      outer_[i] = out.value();
    }
    const auto t = detail::radial_totals(*grid_, v);
    mass_ = t.mass;
    second_moment_ = t.second_moment;
  }

  /// (1/(N-2)) \int |x - y|^{2-N} rho(y) dy at |x| = r.
  [[nodiscard]] double newtonian(double r) const {
    if (r < 0.0) throw DomainError("radial potential: negative radius");
    const auto& g = *grid_;
    const int dim = g.dim();
    const double n = dim;
    const std::size_t cells = g.size();
    double acc = 0.0;
    if (r >= g.rmax()) {
      acc = mass_ * std::pow(r, 2.0 - n);
    } else {
      const auto k = std::min(cells - 1, static_cast<std::size_t>(r / g.width()));
      const double a = g.lower(k);
      const double b = g.upper(k);
      const double rk = r < a ? a : (r > b ? b : r);
      double cell = 0.0;
      if (rk > 0.0) cell += std::pow(rk, 2.0 - n) * g.omega() * detail::pow_diff(rk, a, dim);
      cell += n * g.omega() * (b - rk) * (b + rk) / 2.0;
      const double inner_part = r > 0.0 ? inner_[k] * std::pow(r, 2.0 - n) : 0.0;
      acc = inner_part + values_[k] * cell + outer_[k + 1];
      if (r == 0.0) acc = values_[k] * cell + outer_[k + 1];
    }
    return acc / (n - 2.0);
  }

  /// Full interaction potential: 1/2 (m r^2 + \int |y|^2 rho) + newtonian(r).
  [[nodiscard]] double operator()(double r) const {
    return 0.5 * (mass_ * r * r + second_moment_) + newtonian(r);
  }

  [[nodiscard]] double mass() const { return mass_; }
  [[nodiscard]] double second_moment() const { return second_moment_; }

private:
  std::shared_ptr<const RadialGrid> grid_;
  std::vector<double> values_;
  std::vector<double> inner_;
  std::vector<double> outer_;
  double mass_ = 0.0;
  double second_moment_ = 0.0;
};

/// \int K(x - y) rho(y) dy at |x| = r (quadratic plus Newtonian part).
inline double radial_interaction_potential(const RadialDensity& d, const Kernel& kernel, double r) {
  return RadialPotentialEvaluator(d, kernel)(r);
}

// ---------------------------------------------------------------------------
// Line densities
// ---------------------------------------------------------------------------

namespace detail {

// Toeplitz table T[k] = K(k h) for k >= 1; T[0] is the self-cell value.
inline std::vector<double> line_kernel_table(const Kernel& kernel, double h, std::size_t cells) {
  std::vector<double> t(cells);
  if (std::holds_alternative<ExponentialKernel>(kernel)) {
    t[0] = 1.0;
  } else {
    const auto& pl = std::get<PowerLawKernel>(kernel);
    if (!(pl.p > -1.0)) {
      throw UnsupportedKernel("line grids need p > -1 for an integrable self-cell");
    }
    const double half = 0.5 * h;
    // Mean of |u|^q/q - |u|^p/p over the cell.
    t[0] = power(half, pl.q) / (pl.q * (pl.q + 1.0)) - power(half, pl.p) / (pl.p * (pl.p + 1.0));
  }
  for (std::size_t k = 1; k < cells; ++k) t[k] = kernel_value(kernel, static_cast<double>(k) * h);
  return t;
}

}  // namespace detail

/// h * sum_j T[|i-j|] rho_j by direct O(G^2) quadrature.
inline std::vector<double> line_interaction_potential_direct(const LineDensity& geom, std::span<const double> rho,
                                                             const Kernel& kernel, Workers workers = {}) {
  const std::size_t n = geom.size();
  const double h = geom.width();
  const auto table = detail::line_kernel_table(kernel, h, n);
  std::vector<double> out(n);
  for_each_chunk(n, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      CompensatedSum acc;
      for (std::size_t j = 0; j < n; ++j) acc.add(rho[j] * table[i > j ? i - j : j - i]);
      out[i] = h * acc.value();
    }
  });
  return out;
}

/// Same sum as line_interaction_potential_direct. The exponential kernel
/// factorizes, so it is evaluated with two O(G) sweeps.
inline std::vector<double> line_interaction_potential(const LineDensity& geom, std::span<const double> rho,
                                                      const Kernel& kernel, Workers workers = {}) {
  if (!std::holds_alternative<ExponentialKernel>(kernel)) {
    return line_interaction_potential_direct(geom, rho, kernel, workers);
  }
  const std::size_t n = geom.size();
  const double h = geom.width();
  const double decay = std::exp(-h);
  std::vector<double> left(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc = acc * decay + rho[i];
    left[i] = acc;
  }
  std::vector<double> out(n);
  acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc = acc * decay + rho[i];
    out[i] = h * ((left[i] - rho[i]) + acc);
  }
  return out;
}

inline std::vector<double> line_cell_confinement(const LineDensity& geom, const Confinement& f) {
  std::vector<double> out(geom.size());
  const double h = geom.width();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = geom.node(i);
    out[i] = f.beta() * (x * x + h * h / 12.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generic density interface
// ---------------------------------------------------------------------------

/// Cell-aligned interaction potential (the gradient of the discrete
/// interaction energy with respect to the weighted inner product).
inline std::vector<double> cell_interaction_potential(const RadialDensity& geom, std::span<const double> rho,
                                                      const Kernel& kernel, Workers = {}) {
  detail::require_newtonian(kernel, geom.dim(), "cell_interaction_potential");
  return radial_cell_interaction_potential(geom.grid(), rho);
}

inline std::vector<double> cell_interaction_potential(const LineDensity& geom, std::span<const double> rho,
                                                      const Kernel& kernel, Workers workers = {}) {
  return line_interaction_potential(geom, rho, kernel, workers);
}

inline std::vector<double> cell_confinement(const RadialDensity& geom, const Confinement& f) {
  return radial_cell_confinement(geom.grid(), f);
}

inline std::vector<double> cell_confinement(const LineDensity& geom, const Confinement& f) {
  return line_cell_confinement(geom, f);
}

/// psi on the state's own cells: cell averages for radial grids, node values
/// for line grids. This is the psi the solver and c0 bookkeeping use.
template <class State>
PsiField psi_on_cells(const State& d, const Kernel& kernel, const Confinement& f, Workers workers = {}) {
  auto inter = cell_interaction_potential(d, d.values(), kernel, workers);
  const auto conf = cell_confinement(d, f);
  PsiField out;
  out.points.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.points.push_back({d.node(i)});
    inter[i] += conf[i];
  }
  out.values = std::move(inter);
  return out;
}

/// Pointwise psi at radii.
inline PsiField psi_field(const RadialDensity& d, const Kernel& kernel, const Confinement& f,
                          std::span<const double> radii) {
  const RadialPotentialEvaluator pot(d, kernel);
  PsiField out;
  for (double r : radii) {
    out.points.push_back({r});
    out.values.push_back(pot(r) + f.value_from_r2(r * r));
  }
  return out;
}

/// Pointwise psi at abscissae; a point on a node uses the self-cell rule.
inline PsiField psi_field(const LineDensity& d, const Kernel& kernel, const Confinement& f,
                          std::span<const double> xs) {
  const double h = d.width();
  const auto table = detail::line_kernel_table(kernel, h, 1);
  const auto v = d.values();
  PsiField out;
  for (double x : xs) {
    CompensatedSum acc;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] == 0.0) continue;
      const double r = std::abs(x - d.node(j));
      const double k = r <= 1e-9 * h ? table[0] : kernel_value(kernel, r);
      acc.add(h * v[j] * k);
    }
    acc.add(f.value_from_r2(x * x));
    out.points.push_back({x});
    out.values.push_back(acc.value());
  }
  return out;
}

/// E = 1/2 <rho, K*rho>_w + <rho, F>_w on the cell-aligned potentials.
template <class State>
EnergyBreakdown density_energy(const State& d, const Kernel& kernel, const Confinement& f, Workers workers = {}) {
  const auto inter = cell_interaction_potential(d, d.values(), kernel, workers);
  const auto conf = cell_confinement(d, f);
  const auto v = d.values();
  const auto w = d.weights();
  CompensatedSum ei;
  CompensatedSum ec;
  for (std::size_t i = 0; i < v.size(); ++i) {
    ei.add(0.5 * w[i] * v[i] * inter[i]);
    ec.add(w[i] * v[i] * conf[i]);
  }
  EnergyBreakdown out{ei.value(), ec.value(), 0.0};
  out.total = out.interaction + out.confinement;
  if (!std::isfinite(out.total)) throw NumericalFailure("density_energy: non-finite energy");
  return out;
}

inline EnergyBreakdown density_energy(const DensityState& s, const Kernel& kernel, const Confinement& f,
                                      Workers workers = {}) {
  return std::visit([&](const auto& d) { return density_energy(d, kernel, f, workers); }, s);
}

// ---------------------------------------------------------------------------
// H^{-1} norm and the convex decomposition
// ---------------------------------------------------------------------------

/// \iint rho rho / (N (N-2) w_N |x - y|^{N-2}).
inline double h_minus1_norm_sq(const RadialDensity& d) {
  const auto& g = d.grid();
  if (g.dim() <= 2) throw DomainError("h_minus1_norm_sq: need N > 2");
  const auto newton = detail::radial_newton_cell_potential(g, d.values());
  CompensatedSum acc;
  for (std::size_t i = 0; i < newton.size(); ++i) acc.add(d.values()[i] * g.volumes()[i] * newton[i]);
  return acc.value() / (g.dim() * g.omega());
}

struct EnergyDecomposition {
  double quad_moment_part = 0.0;  // (m/2) \int |x|^2 rho
  double confinement_part = 0.0;  // beta \int |x|^2 rho
  double h1_part = 0.0;           // (N w_N / 2) ||rho||^2_{H^-1}
  double total = 0.0;
};

/// E = (m/2) \int |x|^2 rho + beta \int |x|^2 rho + (N w_N/2) ||rho||^2_{H^{-1}}
/// for centered rho and the Newtonian-quadratic kernel.
inline EnergyDecomposition energy_decomposition(const RadialDensity& d, double beta) {
  const auto mom = moments(d);
  const auto& g = d.grid();
  EnergyDecomposition out;
  out.quad_moment_part = 0.5 * mom.mass * mom.second_moment;
  out.confinement_part = beta * mom.second_moment;
  out.h1_part = 0.5 * g.dim() * g.omega() * h_minus1_norm_sq(d);
  out.total = out.quad_moment_part + out.confinement_part + out.h1_part;
  return out;
}

// ---------------------------------------------------------------------------
// Hardy-Littlewood-Sobolev diagnostics
// ---------------------------------------------------------------------------

struct HlsReport {
  double gamma = 0.0;
  double constant = 0.0;
  double lhs = 0.0;           // \iint |x-y|^gamma rho rho
  double norm_bound = 0.0;    // C(gamma) ||rho||^2_{L^{2N/(2N+gamma)}}
  double interp_bound = 0.0;  // C(gamma) M^{-gamma/N} m^{(2N+gamma)/N}
  bool ok = false;
};

namespace detail {

// Polynomial helpers for the singular near-diagonal shell integrals.
using Poly = std::array<double, 5>;  // coefficients of t^0..t^4

inline Poly poly_shift(const Poly& p, double d) {
  // q(t) = p(t - d)
  Poly q{};
  for (int k = 0; k < 5; ++k) {
    for (int j = 0; j <= k; ++j) {
      q[j] += p[k] * binomial(k, j) * std::pow(-d, k - j);
    }
  }
  return q;
}

// \int_{t0}^{t1} g(t) t^n dt with g = |t|^alpha (alpha != 0) or log|t| (alpha == 0),
// for an interval not crossing zero.
inline double singular_monomial(double t0, double t1, int n, double alpha, bool log_kernel) {
  auto prim_pos = [&](double t) {  // antiderivative on t >= 0
    if (t == 0.0) return 0.0;
    if (log_kernel) return std::pow(t, n + 1) * (std::log(t) / (n + 1) - 1.0 / ((n + 1.0) * (n + 1.0)));
    return std::pow(t, alpha + n + 1) / (alpha + n + 1);
  };
  if (t0 >= 0.0) return prim_pos(t1) - prim_pos(t0);
  // t <= 0: t = -v, dt = -dv, t^n = (-1)^n v^n
  const double sign = (n % 2 == 0) ? 1.0 : -1.0;
  return sign * (prim_pos(-t0) - prim_pos(-t1));
}

// \int_0^1\int_0^1 X^k Y^l g(d + Y - X) dX dY for k, l in {0, 1}, d in {0, 1}.
inline std::array<double, 4> near_cell_moments(double d, double alpha, bool log_kernel) {
  // Weight polynomials in u = Y - X on u >= 0 and u < 0 (coefficients of u^0..u^3).
  const std::array<Poly, 4> pos = {Poly{1, -1, 0, 0, 0},                    // W00 = 1 - u
                                   Poly{0.5, -1, 0.5, 0, 0},                // W10 = (1-u)^2/2
                                   Poly{0.5, 0, -0.5, 0, 0},                // W01 = (1-u^2)/2
                                   Poly{1.0 / 3.0, -0.5, 0, 1.0 / 6.0, 0}};  // W11
  const std::array<Poly, 4> neg = {Poly{1, 1, 0, 0, 0},                     // 1 + u
                                   Poly{0.5, 0, -0.5, 0, 0},                // (1-u^2)/2
                                   Poly{0.5, 1, 0.5, 0, 0},                 // (1+u)^2/2
                                   Poly{1.0 / 3.0, 0.5, 0, -1.0 / 6.0, 0}};  // W11, u < 0
  std::array<double, 4> out{};
  for (std::size_t m = 0; m < 4; ++m) {
    const Poly pp = poly_shift(pos[m], d);  // in t = d + u
    const Poly pn = poly_shift(neg[m], d);
    double s = 0.0;
    for (int k = 0; k < 5; ++k) {
      if (pp[k] != 0.0) s += pp[k] * singular_monomial(d, d + 1.0, k, alpha, log_kernel);
      if (pn[k] != 0.0) s += pn[k] * singular_monomial(d - 1.0, d, k, alpha, log_kernel);
    }
    out[m] = s;
  }
  return out;
}

// \iint_{[a,a+h] x [c,c+h]} r s g(s - r) dr ds with c - a = d h, d in {0, 1}.
inline double near_pair_minus(double a, double c, double h, double d, double alpha, bool log_kernel,
                              const std::array<double, 4>& mom, const std::array<double, 4>& plain) {
  // r s = ac + a h Y + c h X + h^2 X Y; moments are (00, 10, 01, 11) in (X, Y).
  auto combine = [&](const std::array<double, 4>& b) {
    return a * c * b[0] + c * h * b[1] + a * h * b[2] + h * h * b[3];
  };
  (void)d;
  if (log_kernel) return h * h * (combine(mom) + std::log(h) * combine(plain));
  return h * h * std::pow(h, alpha) * combine(mom);
}

// \iint |x - y|^gamma rho rho for a radial density in R^3 and any gamma in (-3, 0).
inline double radial3_riesz_energy(const RadialGrid& g, std::span<const double> rho, double gamma) {
  const double alpha = gamma + 2.0;
  const bool log_kernel = alpha == 0.0;
  const double h = g.width();
  const std::size_t n = g.size();
  auto plus = [&](double r, double s) {
    return log_kernel ? std::log(r + s) : std::pow(r + s, alpha);
  };
  auto minus = [&](double r, double s) {
    const double t = std::abs(r - s);
    return log_kernel ? std::log(t) : std::pow(t, alpha);
  };
  const auto mom_diag = near_cell_moments(0.0, alpha, log_kernel);
  const auto mom_adj = near_cell_moments(1.0, alpha, log_kernel);
  const std::array<double, 4> plain = {1.0, 0.5, 0.5, 0.25};
  CompensatedSum total;
  for (std::size_t i = 0; i < n; ++i) {
    if (rho[i] == 0.0) continue;
    const double a = g.lower(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (rho[j] == 0.0) continue;
      const double c = g.lower(j);
      double plus_part = 0.0;
      double minus_part = 0.0;
      const std::size_t gap = i > j ? i - j : j - i;
      for (std::size_t p = 0; p < kGaussNodes.size(); ++p) {
        const double r = a + 0.5 * h * (1.0 + kGaussNodes[p]);
        for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
          const double s = c + 0.5 * h * (1.0 + kGaussNodes[q]);
          const double wq = 0.25 * h * h * kGaussWeights[p] * kGaussWeights[q];
          plus_part += wq * r * s * plus(r, s);
          if (gap >= 2) minus_part += wq * r * s * minus(r, s);
        }
      }
      if (gap == 0) {
        minus_part = near_pair_minus(a, c, h, 0.0, alpha, log_kernel, mom_diag, plain);
      } else if (gap == 1) {
        // orient so that the second cell is the upper one
        const double lo = std::min(a, c);
        const double hi = std::max(a, c);
        minus_part = near_pair_minus(lo, hi, h, 1.0, alpha, log_kernel, mom_adj, plain);
      }
      const double pair = log_kernel ? (plus_part - minus_part) : (plus_part - minus_part) / alpha;
      total.add(rho[i] * rho[j] * pair);
    }
  }
  return 8.0 * std::numbers::pi * std::numbers::pi * total.value();
}

template <class State>
double lp_norm_sq(const State& d, double s) {
  CompensatedSum acc;
  const auto v = d.values();
  const auto w = d.weights();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > 0.0) acc.add(w[i] * std::pow(v[i], s));
  }
  return std::pow(acc.value(), 2.0 / s);
}

template <class State>
HlsReport finish_hls(const State& d, double gamma, int dim, double lhs) {
  HlsReport rep;
  rep.gamma = gamma;
  rep.constant = hls_sharp_constant(gamma, dim);
  rep.lhs = lhs;
  const double n = dim;
  const double s = 2.0 * n / (2.0 * n + gamma);
  rep.norm_bound = rep.constant * lp_norm_sq(d, s);
  const double mass = moments(d).mass;
  rep.interp_bound = rep.constant * std::pow(d.cap(), -gamma / n) * std::pow(mass, (2.0 * n + gamma) / n);
  const double tol = 1e-12 * std::max({std::abs(rep.lhs), rep.norm_bound, rep.interp_bound, 1e-300});
  rep.ok = rep.lhs <= rep.norm_bound + tol && rep.norm_bound <= rep.interp_bound + tol;
  return rep;
}

}  // namespace detail

/// HLS diagnostics for a radial density. The double integral is exact for the
/// piecewise-constant density: via the shell theorem when gamma = 2 - N, and by
/// shell-pair integration (analytic near the diagonal) for N = 3.
inline HlsReport hls_check(const RadialDensity& d, double gamma) {
  const int dim = d.dim();
  if (!(gamma > -dim && gamma < 0.0)) throw DomainError("hls_check: need -N < gamma < 0");
  double lhs = 0.0;
  if (dim > 2 && gamma == 2.0 - dim) {
    const auto newton = detail::radial_newton_cell_potential(d.grid(), d.values());
    CompensatedSum acc;
    for (std::size_t i = 0; i < newton.size(); ++i) acc.add(d.values()[i] * d.weights()[i] * newton[i]);
    lhs = (dim - 2.0) * acc.value();
  } else if (dim == 3) {
    lhs = detail::radial3_riesz_energy(d.grid(), d.values(), gamma);
  } else {
    throw UnsupportedKernel("hls_check: radial states support gamma = 2 - N, or any gamma when N = 3");
  }
  return detail::finish_hls(d, gamma, dim, lhs);
}

/// HLS diagnostics for a line density (N = 1, -1 < gamma < 0), with exact
/// cell-pair integrals of |x - y|^gamma.
inline HlsReport hls_check(const LineDensity& d, double gamma) {
  if (!(gamma > -1.0 && gamma < 0.0)) throw DomainError("hls_check: need -1 < gamma < 0 on a line");
  const std::size_t n = d.size();
  const double h = d.width();
  const double e = gamma + 2.0;
  const double denom = (gamma + 1.0) * (gamma + 2.0);
  // \iint_{cell_i x cell_j} |x-y|^gamma = h^{2+gamma} J(|i-j|)
  std::vector<double> table(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double dk = static_cast<double>(k);
    table[k] = (std::pow(dk + 1.0, e) - 2.0 * std::pow(dk, e) + std::pow(std::abs(dk - 1.0), e)) / denom;
  }
  const double scale = std::pow(h, e);
  const auto v = d.values();
  CompensatedSum acc;
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (v[j] != 0.0) acc.add(v[i] * v[j] * table[i > j ? i - j : j - i]);
    }
  }
  return detail::finish_hls(d, gamma, 1, scale * acc.value());
}

inline HlsReport hls_check(const DensityState& s, double gamma) {
  return std::visit([gamma](const auto& d) { return hls_check(d, gamma); }, s);
}

}  // namespace aggmin
