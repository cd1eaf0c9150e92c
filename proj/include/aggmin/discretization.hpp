#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "aggmin/errors.hpp"
#include "aggmin/numerics.hpp"

namespace aggmin {

// ---------------------------------------------------------------------------
// Particle ensembles
// ---------------------------------------------------------------------------

/// Weighted point masses in R^N. Positions are stored row-major (particle i
/// occupies [i*N, (i+1)*N)).
class ParticleEnsemble {
public:
  ParticleEnsemble() = default;

  ParticleEnsemble(int dim, std::vector<double> positions, std::vector<double> weights)
      : dim_(dim), positions_(std::move(positions)), weights_(std::move(weights)) {
    if (dim_ < 1) throw ConfigError("particle ensemble: dimension must be >= 1");
    if (positions_.size() != weights_.size() * static_cast<std::size_t>(dim_)) {
      throw ConfigError("particle ensemble: positions and weights differ in length");
    }
    for (double w : weights_) {
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("particle ensemble: weights must be positive");
    }
    for (double x : positions_) {
      if (!std::isfinite(x)) throw NumericalFailure("particle ensemble: non-finite coordinate");
    }
  }

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return weights_.size(); }
  [[nodiscard]] bool empty() const { return weights_.empty(); }

  [[nodiscard]] std::span<const double> position(std::size_t i) const {
    return {positions_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  [[nodiscard]] std::span<double> position(std::size_t i) {
    return {positions_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  [[nodiscard]] double weight(std::size_t i) const { return weights_[i]; }
  [[nodiscard]] std::span<const double> positions() const { return positions_; }
  [[nodiscard]] std::span<double> positions() { return positions_; }
  [[nodiscard]] std::span<const double> weights() const { return weights_; }

  [[nodiscard]] double total_mass() const {
    CompensatedSum acc;
    for (double w : weights_) acc.add(w);
    return acc.value();
  }

  friend bool operator==(const ParticleEnsemble&, const ParticleEnsemble&) = default;

private:
  int dim_ = 1;
  std::vector<double> positions_;
  std::vector<double> weights_;
};

/// K equal-weight particles i.i.d. uniform in B(center, radius).
inline ParticleEnsemble sample_uniform_ball(SeededRng& rng, std::size_t count, double radius,
                                           std::span<const double> center, int dim,
                                           double total_mass) {
  if (count < 1) throw ConfigError("sample_uniform_ball: need at least one particle");
  if (!(radius > 0.0)) throw ConfigError("sample_uniform_ball: radius must be positive");
  if (!(total_mass > 0.0)) throw ConfigError("sample_uniform_ball: mass must be positive");
  if (center.size() != static_cast<std::size_t>(dim)) {
    throw ConfigError("sample_uniform_ball: center has wrong dimension");
  }
  const auto n = static_cast<std::size_t>(dim);
  std::vector<double> pos(count * n);
  for (std::size_t i = 0; i < count; ++i) {
    std::span<double> p(pos.data() + i * n, n);
    sample_unit_ball(rng, p);
    for (std::size_t d = 0; d < n; ++d) p[d] = center[d] + radius * p[d];
  }
  return {dim, std::move(pos), std::vector<double>(count, total_mass / static_cast<double>(count))};
}

// ---------------------------------------------------------------------------
// Radial grids
// ---------------------------------------------------------------------------

namespace detail {

inline double ipow(double x, int n) {
  double r = 1.0;
  for (int k = 0; k < n; ++k) r *= x;
  return r;
}

// b^n - a^n for 0 <= a <= b without cancellation.
inline double pow_diff(double b, double a, int n) {
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += ipow(b, k) * ipow(a, n - 1 - k);
  return (b - a) * s;
}

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace detail

/// Uniform shells [r_i, r_{i+1}] on [0, rmax] in R^N and the exact shell
/// integrals needed for piecewise-constant radial densities.
class RadialGrid {
public:
  RadialGrid(int dim, double rmax, std::size_t cells) : dim_(dim), rmax_(rmax), cells_(cells) {
    if (dim < 1) throw ConfigError("radial grid: dimension must be >= 1");
    if (!(rmax > 0.0) || !std::isfinite(rmax)) throw ConfigError("radial grid: rmax must be positive");
    if (cells < 1) throw ConfigError("radial grid: need at least one cell");
    omega_ = unit_ball_volume(dim);
    const double n = dim;
    volume_.resize(cells);
    second_moment_.resize(cells);
    newton_outer_.resize(cells);
    newton_self_.resize(cells);
    for (std::size_t i = 0; i < cells; ++i) {
      const double a = lower(i);
      const double b = upper(i);
      const double h = b - a;
      volume_[i] = omega_ * detail::pow_diff(b, a, dim);
      second_moment_[i] = n * omega_ * detail::pow_diff(b, a, dim + 2) / (n + 2.0);
      newton_outer_[i] = n * omega_ * (b - a) * (b + a) / 2.0;
      // 2 N w^2 \int_a^b s (s^N - a^N) ds, expanded in powers of (s - a).
      double self = 0.0;
      for (int k = 1; k <= dim; ++k) {
        self += detail::binomial(dim, k) * detail::ipow(a, dim - k) *
                (a * detail::ipow(h, k + 1) / (k + 1) + detail::ipow(h, k + 2) / (k + 2));
      }
      newton_self_[i] = 2.0 * n * omega_ * omega_ * self;
    }
  }

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] double rmax() const { return rmax_; }
  [[nodiscard]] std::size_t size() const { return cells_; }
  [[nodiscard]] double width() const { return rmax_ / static_cast<double>(cells_); }
  [[nodiscard]] double omega() const { return omega_; }

  [[nodiscard]] double lower(std::size_t i) const { return rmax_ * static_cast<double>(i) / cells_; }
  [[nodiscard]] double upper(std::size_t i) const { return rmax_ * static_cast<double>(i + 1) / cells_; }
  [[nodiscard]] double center(std::size_t i) const { return 0.5 * (lower(i) + upper(i)); }

  /// Shell volume w_i (the quadrature weight).
  [[nodiscard]] std::span<const double> volumes() const { return volume_; }
  /// \int_shell |x|^2 dx.
  [[nodiscard]] std::span<const double> second_moments() const { return second_moment_; }
  /// \int_shell |x|^{2-N} dx (exterior Newtonian weight).
  [[nodiscard]] std::span<const double> newton_outer() const { return newton_outer_; }
  /// \iint_{shell x shell} max(|x|,|y|)^{2-N} dx dy.
  [[nodiscard]] std::span<const double> newton_self() const { return newton_self_; }

  /// Volume of shell i intersected with B(0, r).
  [[nodiscard]] double volume_below(std::size_t i, double r) const {
    const double a = lower(i);
    const double b = upper(i);
    if (r <= a) return 0.0;
    if (r >= b) return volume_[i];
    return omega_ * detail::pow_diff(r, a, dim_);
  }

private:
  int dim_;
  double rmax_;
  std::size_t cells_;
  double omega_ = 0.0;
  std::vector<double> volume_;
  std::vector<double> second_moment_;
  std::vector<double> newton_outer_;
  std::vector<double> newton_self_;
};

/// Piecewise-constant radial density on a RadialGrid, capped at M.
class RadialDensity {
public:
  RadialDensity(std::shared_ptr<const RadialGrid> grid, std::vector<double> values, double cap)
      : grid_(std::move(grid)), values_(std::move(values)), cap_(cap) {
    if (!grid_) throw ConfigError("radial density: missing grid");
    if (values_.size() != grid_->size()) throw ConfigError("radial density: value count != cell count");
    if (!(cap_ > 0.0)) throw ConfigError("radial density: cap must be positive");
    check_values();
  }

  [[nodiscard]] const RadialGrid& grid() const { return *grid_; }
  [[nodiscard]] const std::shared_ptr<const RadialGrid>& grid_ptr() const { return grid_; }
  [[nodiscard]] int dim() const { return grid_->dim(); }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<const double> weights() const { return grid_->volumes(); }
  [[nodiscard]] double cap() const { return cap_; }
  [[nodiscard]] double node(std::size_t i) const { return grid_->center(i); }

  [[nodiscard]] RadialDensity with_values(std::vector<double> v) const { return {grid_, std::move(v), cap_}; }

  /// Cell averages of height * indicator(B(0, radius)).
  static RadialDensity uniform_ball(std::shared_ptr<const RadialGrid> grid, double radius,
                                    double height, double cap) {
    std::vector<double> v(grid->size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = height * grid->volume_below(i, radius) / grid->volumes()[i];
    }
    return {std::move(grid), std::move(v), cap};
  }

  static RadialDensity constant(std::shared_ptr<const RadialGrid> grid, double value, double cap) {
    const std::size_t n = grid->size();
    return {std::move(grid), std::vector<double>(n, value), cap};
  }

private:
  void check_values() const {
    for (double v : values_) {
      if (!std::isfinite(v)) throw NumericalFailure("radial density: non-finite value");
      if (v < 0.0 || v > cap_ * (1.0 + 1e-12)) {
        throw ConfigError("radial density: values must lie in [0, M]");
      }
    }
  }

  std::shared_ptr<const RadialGrid> grid_;
  std::vector<double> values_;
  double cap_;
};

// ---------------------------------------------------------------------------
// Line grids
// ---------------------------------------------------------------------------

/// Piecewise-constant density on G uniform cells of [-L, L], capped at M.
class LineDensity {
public:
  LineDensity(double half_width, std::vector<double> values, double cap)
      : half_width_(half_width), values_(std::move(values)), cap_(cap) {
    if (!(half_width_ > 0.0) || !std::isfinite(half_width_)) {
      throw ConfigError("line density: half-width must be positive");
    }
    if (values_.empty()) throw ConfigError("line density: need at least one cell");
    if (!(cap_ > 0.0)) throw ConfigError("line density: cap must be positive");
    for (double v : values_) {
      if (!std::isfinite(v)) throw NumericalFailure("line density: non-finite value");
      if (v < 0.0 || v > cap_ * (1.0 + 1e-12)) throw ConfigError("line density: values must lie in [0, M]");
    }
    weights_.assign(values_.size(), width());
  }

  [[nodiscard]] int dim() const { return 1; }
  [[nodiscard]] double half_width() const { return half_width_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] double width() const { return 2.0 * half_width_ / static_cast<double>(values_.size()); }
  [[nodiscard]] double node(std::size_t i) const {
    return -half_width_ + (static_cast<double>(i) + 0.5) * width();
  }
  [[nodiscard]] double lower(std::size_t i) const { return -half_width_ + static_cast<double>(i) * width(); }
  [[nodiscard]] double upper(std::size_t i) const { return lower(i) + width(); }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<const double> weights() const { return weights_; }
  [[nodiscard]] double cap() const { return cap_; }

  [[nodiscard]] LineDensity with_values(std::vector<double> v) const { return {half_width_, std::move(v), cap_}; }

  /// Samples f at the cell centers.
  template <class F>
  static LineDensity from_function(double half_width, std::size_t cells, double cap, F&& f) {
    const double h = 2.0 * half_width / static_cast<double>(cells);
    std::vector<double> v(cells);
    for (std::size_t i = 0; i < cells; ++i) v[i] = f(-half_width + (static_cast<double>(i) + 0.5) * h);
    return {half_width, std::move(v), cap};
  }

private:
  double half_width_;
  std::vector<double> values_;
  std::vector<double> weights_;
  double cap_;
};

using DensityState = std::variant<RadialDensity, LineDensity>;

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct Moments {
  double mass = 0.0;
  std::vector<double> center;  // center of mass (zero vector for empty states)
  double second_moment = 0.0;  // \int |x|^2 rho about the origin
};

inline Moments moments(const ParticleEnsemble& e) {
  const auto n = static_cast<std::size_t>(e.dim());
  CompensatedSum mass;
  CompensatedSum m2;
  std::vector<CompensatedSum> first(n);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double w = e.weight(i);
    const auto x = e.position(i);
    double r2 = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      first[d].add(w * x[d]);
      r2 += x[d] * x[d];
    }
    mass.add(w);
    m2.add(w * r2);
  }
  Moments out{mass.value(), std::vector<double>(n, 0.0), m2.value()};
  if (out.mass > 0.0) {
    for (std::size_t d = 0; d < n; ++d) out.center[d] = first[d].value() / out.mass;
  }
  return out;
}

/// Radial states are centered by symmetry; the second moment integrates
/// |x|^2 exactly over each shell.
inline Moments moments(const RadialDensity& d) {
  CompensatedSum mass;
  CompensatedSum m2;
  const auto w = d.grid().volumes();
  const auto q = d.grid().second_moments();
  const auto v = d.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    mass.add(v[i] * w[i]);
    m2.add(v[i] * q[i]);
  }
  return {mass.value(), std::vector<double>(static_cast<std::size_t>(d.dim()), 0.0), m2.value()};
}

inline Moments moments(const LineDensity& d) {
  CompensatedSum mass;
  CompensatedSum first;
  CompensatedSum m2;
  const double h = d.width();
  const auto v = d.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = d.node(i);
    mass.add(v[i] * h);
    first.add(v[i] * h * x);
    m2.add(v[i] * (h * x * x + h * h * h / 12.0));
  }
  Moments out{mass.value(), {0.0}, m2.value()};
  if (out.mass > 0.0) out.center[0] = first.value() / out.mass;
  return out;
}

inline Moments moments(const DensityState& s) {
  return std::visit([](const auto& d) { return moments(d); }, s);
}

/// max over candidate centers y of the mass inside the closed ball B(y, R).
/// Centers are points in R^N; an empty list means the default candidates
/// (particle positions).
inline double concentration_mass(const ParticleEnsemble& e, double radius,
                                 std::span<const std::vector<double>> centers = {}) {
  if (!(radius > 0.0)) throw DomainError("concentration_mass: radius must be positive");
  const auto n = static_cast<std::size_t>(e.dim());
  auto mass_at = [&](std::span<const double> y) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const auto x = e.position(i);
      double r2 = 0.0;
      for (std::size_t d = 0; d < n; ++d) r2 += (x[d] - y[d]) * (x[d] - y[d]);
      if (r2 <= radius * radius) acc.add(e.weight(i));
    }
    return acc.value();
  };
  double best = 0.0;
  if (centers.empty()) {
    for (std::size_t i = 0; i < e.size(); ++i) best = std::max(best, mass_at(e.position(i)));
  } else {
    for (const auto& y : centers) {
      if (y.size() != n) throw DomainError("concentration_mass: center has wrong dimension");
      best = std::max(best, mass_at(y));
    }
  }
  return best;
}

namespace detail {

// Fraction of the sphere |x| = s in R^N lying inside B(y, R) with |y| = dist.
inline double sphere_fraction_inside(int dim, double s, double dist, double radius) {
  if (s + dist <= radius) return 1.0;
  if (s >= dist + radius || s <= dist - radius) return 0.0;
  if (s == 0.0 || dist == 0.0) return s <= radius ? 1.0 : 0.0;
  // Inside iff cos(theta) >= t.
  const double t = std::clamp((s * s + dist * dist - radius * radius) / (2.0 * s * dist), -1.0, 1.0);
  if (dim == 1) return t <= -1.0 ? 1.0 : (t <= 1.0 ? 0.5 : 0.0);
  // Normalized area of the cap {cos theta >= |t|} is I_{1-t^2}((N-1)/2, 1/2) / 2.
  const double cap = 0.5 * boost::math::ibeta(0.5 * (dim - 1), 0.5, 1.0 - t * t);
  return t >= 0.0 ? cap : 1.0 - cap;
}

inline constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

}  // namespace detail

/// Radial states: each center is a point whose norm is what matters. Cells
/// cut by the sphere of the ball are integrated with two fixed 8-point
/// Gauss-Legendre panels, so the value is nondecreasing in R.
inline double concentration_mass(const RadialDensity& d, double radius,
                                 std::span<const std::vector<double>> centers = {}) {
  if (!(radius > 0.0)) throw DomainError("concentration_mass: radius must be positive");
  const auto& g = d.grid();
  const auto v = d.values();
  const auto w = g.volumes();
  const double n = g.dim();
  auto mass_at = [&](double dist) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == 0.0) continue;
      const double a = g.lower(i);
      const double b = g.upper(i);
      if (b + dist <= radius) {
        acc.add(v[i] * w[i]);
        continue;
      }
      if (a >= dist + radius || b <= dist - radius) continue;
      double part = 0.0;
      for (int panel = 0; panel < 2; ++panel) {
        const double lo = a + 0.5 * panel * (b - a);
        const double half = 0.25 * (b - a);
        for (std::size_t k = 0; k < detail::kGaussNodes.size(); ++k) {
          const double s = lo + half * (1.0 + detail::kGaussNodes[k]);
          part += detail::kGaussWeights[k] * half * n * g.omega() * std::pow(s, n - 1.0) *
                  detail::sphere_fraction_inside(g.dim(), s, dist, radius);
        }
      }
      acc.add(v[i] * part);
    }
    return acc.value();
  };
  double best = 0.0;
  if (centers.empty()) {
    for (std::size_t i = 0; i < v.size(); ++i) best = std::max(best, mass_at(g.center(i)));
  } else {
    for (const auto& y : centers) {
      double r2 = 0.0;
      for (double c : y) r2 += c * c;
      best = std::max(best, mass_at(std::sqrt(r2)));
    }
  }
  return best;
}

/// Line states: exact mass of the piecewise-constant density in [y-R, y+R].
inline double concentration_mass(const LineDensity& d, double radius,
                                 std::span<const std::vector<double>> centers = {}) {
  if (!(radius > 0.0)) throw DomainError("concentration_mass: radius must be positive");
  const auto v = d.values();
  auto mass_at = [&](double y) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double lo = std::max(d.lower(i), y - radius);
      const double hi = std::min(d.upper(i), y + radius);
      if (hi > lo) acc.add(v[i] * (hi - lo));
    }
    return acc.value();
  };
  double best = 0.0;
  if (centers.empty()) {
    for (std::size_t i = 0; i < v.size(); ++i) best = std::max(best, mass_at(d.node(i)));
  } else {
    for (const auto& y : centers) {
      if (y.size() != 1) throw DomainError("concentration_mass: line centers are 1-D");
      best = std::max(best, mass_at(y[0]));
    }
  }
  return best;
}

namespace detail {

template <class State>
double support_radius_impl(const State& d, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw DomainError("support_radius: threshold must lie in (0, 1)");
  }
  const auto v = d.values();
  const double vmax = *std::max_element(v.begin(), v.end());
  if (!(vmax > 0.0)) throw DomainError("support_radius: empty support (density is identically zero)");
  double best = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] >= threshold * vmax) best = std::max(best, std::abs(d.node(i)));
  }
  return best;
}

}  // namespace detail

/// Largest |node| with rho >= threshold * max(rho).
inline double support_radius(const RadialDensity& d, double threshold) {
  return detail::support_radius_impl(d, threshold);
}
inline double support_radius(const LineDensity& d, double threshold) {
  return detail::support_radius_impl(d, threshold);
}
inline double support_radius(const DensityState& s, double threshold) {
  return std::visit([threshold](const auto& d) { return support_radius(d, threshold); }, s);
}

}  // namespace aggmin
