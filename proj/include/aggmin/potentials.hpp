#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "aggmin/errors.hpp"

namespace aggmin {

/// K(r) = r^q / q - r^p / p, repulsive for r below 1 and attractive above.
struct PowerLawKernel {
  double p = -1.0;  // repulsion exponent
  double q = 2.0;   // attraction exponent

  /// Checks q > p > -N and p, q != 0.
  void validate(int dim) const {
    if (p == 0.0 || q == 0.0) throw ConfigError("power-law kernel: exponents must be nonzero");
    if (!(q > p)) throw ConfigError("power-law kernel: need q > p");
    if (!(p > -static_cast<double>(dim))) {
      throw ConfigError("power-law kernel: need p > -N (p=" + std::to_string(p) +
                        ", N=" + std::to_string(dim) + ")");
    }
  }

  friend bool operator==(const PowerLawKernel&, const PowerLawKernel&) = default;
};

/// K(r) = exp(-r). Only used on line grids.
struct ExponentialKernel {
  friend bool operator==(const ExponentialKernel&, const ExponentialKernel&) = default;
};

using Kernel = std::variant<PowerLawKernel, ExponentialKernel>;

namespace detail {

inline constexpr double kSingularRadius = 1e-12;

// r^e with an exact repeated-squaring path for small integral exponents.
inline double power(double r, double e) {
  if (e == std::trunc(e) && std::abs(e) <= 64.0) {
    auto n = static_cast<long>(std::abs(e));
    double base = r;
    double acc = 1.0;
    while (n > 0) {
      if (n & 1L) acc *= base;
      base *= base;
      n >>= 1;
    }
    return e < 0.0 ? 1.0 / acc : acc;
  }
  return std::exp(e * std::log(r));
}

inline void check_radius(double r, const char* what) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw DomainError(std::string(what) + ": radius must be positive and finite, got " +
                      std::to_string(r));
  }
}

}  // namespace detail

inline double kernel_value(const PowerLawKernel& k, double r) {
  detail::check_radius(r, "kernel_value");
  if (k.p < 0.0 && r < detail::kSingularRadius) {
    throw DomainError("kernel_value: radius " + std::to_string(r) + " inside the singular core");
  }
  return detail::power(r, k.q) / k.q - detail::power(r, k.p) / k.p;
}

inline double kernel_value(const ExponentialKernel&, double r) {
  detail::check_radius(r, "kernel_value");
  return std::exp(-r);
}

inline double kernel_value(const Kernel& k, double r) {
  return std::visit([r](const auto& kk) { return kernel_value(kk, r); }, k);
}

/// dK/dr.
inline double kernel_slope(const PowerLawKernel& k, double r) {
  detail::check_radius(r, "kernel_slope");
  if (k.p < 1.0 && r < detail::kSingularRadius) {
    throw DomainError("kernel_slope: radius " + std::to_string(r) + " inside the singular core");
  }
  return detail::power(r, k.q - 1.0) - detail::power(r, k.p - 1.0);
}

inline double kernel_slope(const ExponentialKernel&, double r) {
  detail::check_radius(r, "kernel_slope");
  return -std::exp(-r);
}

inline double kernel_slope(const Kernel& k, double r) {
  return std::visit([r](const auto& kk) { return kernel_slope(kk, r); }, k);
}

/// Global lower bound 1/q - 1/p, available when 0 < p < q.
inline std::optional<double> kernel_lower_bound(const PowerLawKernel& k) {
  if (k.p > 0.0 && k.q > k.p) return 1.0 / k.q - 1.0 / k.p;
  return std::nullopt;
}

/// q = 2, p = 2 - N: the kernel whose repulsive part is a multiple of the
/// Newtonian potential.
inline bool is_newtonian_quadratic(const Kernel& k, int dim) {
  const auto* pl = std::get_if<PowerLawKernel>(&k);
  return pl != nullptr && dim > 2 && pl->q == 2.0 && pl->p == 2.0 - dim;
}

inline std::string describe(const Kernel& k) {
  if (const auto* pl = std::get_if<PowerLawKernel>(&k)) {
    return "power_law(p=" + std::to_string(pl->p) + ", q=" + std::to_string(pl->q) + ")";
  }
  return "exponential";
}

/// Exogenous potential F: zero, or beta |x|^2.
class Confinement {
public:
  enum class Kind { none, quadratic };

  Confinement() = default;

  static Confinement none() { return {}; }

  static Confinement quadratic(double beta) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
      throw ConfigError("quadratic confinement: beta must be finite and >= 0");
    }
    Confinement c;
    c.kind_ = Kind::quadratic;
    c.beta_ = beta;
    return c;
  }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] double beta() const { return kind_ == Kind::quadratic ? beta_ : 0.0; }

  /// F as a function of |x|^2.
  [[nodiscard]] double value_from_r2(double r2) const { return beta() * r2; }

  [[nodiscard]] double value(std::span<const double> x) const {
    double r2 = 0.0;
    for (double c : x) r2 += c * c;
    return value_from_r2(r2);
  }

  /// grad F = 2 beta x, written into `out`.
  void gradient(std::span<const double> x, std::span<double> out) const {
    const double s = 2.0 * beta();
    for (std::size_t d = 0; d < x.size(); ++d) out[d] = s * x[d];
  }

  friend bool operator==(const Confinement&, const Confinement&) = default;

private:
  Kind kind_ = Kind::none;
  double beta_ = 0.0;
};

struct ConfinementEval {
  double value = 0.0;
  std::vector<double> gradient;
};

inline ConfinementEval confinement_eval(const Confinement& f, std::span<const double> x) {
  ConfinementEval e{f.value(x), std::vector<double>(x.size())};
  f.gradient(x, e.gradient);
  return e;
}

}  // namespace aggmin
