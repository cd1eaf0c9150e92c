#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "aggmin/analytic.hpp"
#include "aggmin/discretization.hpp"
#include "aggmin/energy.hpp"
#include "aggmin/euler_lagrange.hpp"
#include "aggmin/minimize.hpp"
#include "aggmin/numerics.hpp"
#include "aggmin/potentials.hpp"

namespace aggmin {

struct SelfTestResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

inline RadialDensity random_radial(SeededRng& rng, const std::shared_ptr<const RadialGrid>& g, double cap,
                                   double mass) {
  std::vector<double> v(g->size());
  for (auto& x : v) x = rng.uniform(0.0, cap);
  return RadialDensity(g, project_capped_box(v, g->volumes(), cap, mass), cap);
}

inline ParticleEnsemble random_particles(SeededRng& rng, std::size_t count, int dim) {
  std::vector<double> pos(count * static_cast<std::size_t>(dim));
  for (auto& x : pos) x = rng.uniform(-1.0, 1.0);
  std::vector<double> w(count);
  for (auto& x : w) x = rng.uniform(0.5, 1.5) / static_cast<double>(count);
  return {dim, std::move(pos), std::move(w)};
}

}  // namespace detail

/// A quick pass over the library's invariants (a few seconds in total).
inline std::vector<SelfTestResult> run_selftest() {
  std::vector<SelfTestResult> out;
  auto check = [&](std::string name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
      auto [ok, msg] = body();
      out.push_back({std::move(name), ok, std::move(msg)});
    } catch (const std::exception& e) {
      out.push_back({std::move(name), false, std::string("threw: ") + e.what()});
    }
  };
  const Kernel newton3 = PowerLawKernel{-1.0, 2.0};
  const auto beta1 = Confinement::quadratic(1.0);

  check("kernel slope vanishes at r = 1", [] {
    double worst = 0.0;
    for (double p : {-2.0, -1.0, -0.5, 0.5, 1.0, 3.0}) worst = std::max(worst, std::abs(kernel_slope(PowerLawKernel{p, 4.0}, 1.0)));
    return std::pair{worst == 0.0, "max |K'(1)| = " + detail::sci(worst)};
  });

  check("kernel slope matches central differences", [] {
    double worst = 0.0;
    const double h = 1e-5;
    for (const Kernel k : {Kernel{PowerLawKernel{-1.0, 2.0}}, Kernel{PowerLawKernel{0.5, 3.5}}, Kernel{ExponentialKernel{}}}) {
      for (double r = 0.1; r <= 10.0; r += 0.37) {
        const double fd = (kernel_value(k, r + h) - kernel_value(k, r - h)) / (2.0 * h);
        const double s = kernel_slope(k, r);
        worst = std::max(worst, std::abs(s - fd) / (1.0 + std::abs(s)));
      }
    }
    return std::pair{worst <= 1e-6, "worst scaled error " + detail::sci(worst)};
  });

  check("capped-box projection is idempotent and mass-exact", [] {
    SeededRng rng(7);
    double worst_mass = 0.0;
    double worst_idem = 0.0;
    for (int t = 0; t < 50; ++t) {
      std::vector<double> v(40);
      std::vector<double> w(40);
      for (auto& x : v) x = rng.uniform(-1.0, 3.0);
      for (auto& x : w) x = rng.uniform(0.1, 1.0);
      const auto p = project_capped_box(v, w, 1.5, 5.0);
      const auto q = project_capped_box(p, w, 1.5, 5.0);
      CompensatedSum m;
      for (std::size_t i = 0; i < p.size(); ++i) {
        m.add(p[i] * w[i]);
        worst_idem = std::max(worst_idem, std::abs(p[i] - q[i]));
      }
      worst_mass = std::max(worst_mass, std::abs(m.value() - 5.0) / 5.0);
    }
    return std::pair{worst_mass <= 1e-12 && worst_idem <= 1e-12,
                     "mass " + detail::sci(worst_mass) + ", idempotence " + detail::sci(worst_idem)};
  });

  check("energy decomposition identity (20 random radial densities)", [&] {
    SeededRng rng(11);
    auto g = std::make_shared<const RadialGrid>(3, 1.5, 256);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const auto d = detail::random_radial(rng, g, 0.75, 1.0);
      const double e = density_energy(d, newton3, beta1).total;
      const double s = energy_decomposition(d, 1.0).total;
      worst = std::max(worst, std::abs(e - s) / std::abs(e));
    }
    return std::pair{worst <= 1e-6, "worst relative gap " + detail::sci(worst)};
  });

  check("particle velocity matches energy gradient", [&] {
    SeededRng rng(5);
    const auto e = detail::random_particles(rng, 20, 3);
    const auto v = particle_velocity(e, newton3, beta1);
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t i = 0; i < e.size(); ++i) {
      for (std::size_t d = 0; d < 3; ++d) {
        auto plus = e;
        auto minus = e;
        plus.position(i)[d] += h;
        minus.position(i)[d] -= h;
        const double grad = particle_energy_change(minus, plus, newton3, beta1) / (2.0 * h);
        const double expect = -e.weight(i) * v[i * 3 + d];
        worst = std::max(worst, std::abs(grad - expect) / (std::abs(expect) + 1e-3 * e.weight(i)));
      }
    }
    return std::pair{worst <= 1e-5, "worst relative error " + detail::sci(worst)};
  });

  check("analytic ball passes the Euler-Lagrange check", [&] {
    auto g = std::make_shared<const RadialGrid>(3, 1.5, 2048);
    const auto b = ball_solution(3, 1.0, 1.0);
    const auto d = RadialDensity::uniform_ball(g, b.r0, b.height, 0.75);
    const auto rep = el_verify(d, newton3, beta1);
    return std::pair{rep.pass && std::abs(rep.c0 - b.c0) <= 1e-3,
                     "c0 " + detail::sci(rep.c0) + ", on-support " + detail::sci(rep.on_support_sup)};
  });

  check("two-particle flow reaches the equilibrium", [&] {
    ParticleEnsemble e(3, {-1.0, 0.0, 0.0, 1.0, 0.0, 0.0}, {0.5, 0.5});
    const auto res = particle_flow(e, newton3, beta1, SolverConfig::particle_defaults());
    const double a = 0.5 * std::abs(res.final.position(1)[0] - res.final.position(0)[0]);
    const double err = std::abs(a - two_particle_equilibrium(1.0, 1.0));
    return std::pair{err <= 1e-8, "half-separation error " + detail::sci(err)};
  });

  check("HLS inequality on random radial densities", [] {
    SeededRng rng(3);
    auto g = std::make_shared<const RadialGrid>(3, 1.5, 64);
    bool ok = true;
    for (int t = 0; t < 20; ++t) ok = ok && hls_check(detail::random_radial(rng, g, 0.75, 1.0), -1.0).ok;
    return std::pair{ok, ok ? "all hold" : "violation found"};
  });

  check("thread count does not change results", [&] {
    SeededRng rng(9);
    const auto e = detail::random_particles(rng, 300, 3);
    const double a = particle_energy(e, newton3, beta1, Workers{1}).total;
    const double b = particle_energy(e, newton3, beta1, Workers{4}).total;
    return std::pair{a == b, "difference " + detail::sci(a - b)};
  });

  return out;
}

}  // namespace aggmin
