#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "aggmin/errors.hpp"
#include "aggmin/minimize.hpp"
#include "aggmin/numerics.hpp"
#include "aggmin/potentials.hpp"

namespace aggmin {

struct ParticleSpec {
  std::size_t count = 500;
  double radius = 2.0;
  std::uint64_t seed = 42;
  friend bool operator==(const ParticleSpec&, const ParticleSpec&) = default;
};

struct RadialSpec {
  std::size_t cells = 2048;
  double rmax = 1.5;
  friend bool operator==(const RadialSpec&, const RadialSpec&) = default;
};

struct LineSpec {
  std::size_t cells = 2048;
  double halfwidth = 1.5;
  friend bool operator==(const LineSpec&, const LineSpec&) = default;
};

using DiscretizationSpec = std::variant<ParticleSpec, RadialSpec, LineSpec>;

/// Starting state for grid runs: the constant density m / |domain|, or the
/// closed-form minimizer (the ball on radial grids, the 1D profile on lines).
enum class InitKind { constant, analytic };

struct RunConfig {
  int dim = 3;
  Kernel kernel = PowerLawKernel{-1.0, 2.0};
  Confinement confinement = Confinement::quadratic(1.0);
  DiscretizationSpec discretization = RadialSpec{};
  double cap = 0.75;  // M
  double mass = 1.0;  // m
  InitKind init = InitKind::constant;
  SolverConfig solver = SolverConfig::density_defaults();
  std::string output = "out";
  std::vector<std::string> warnings;

  [[nodiscard]] bool is_particles() const { return std::holds_alternative<ParticleSpec>(discretization); }

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.dim == b.dim && a.kernel == b.kernel && a.confinement == b.confinement &&
           a.discretization == b.discretization && a.cap == b.cap && a.mass == b.mass && a.init == b.init &&
           a.solver == b.solver && a.output == b.output;
  }
};

namespace detail {

using nlohmann::json;

class Violations {
public:
  void add(std::string msg) { items_.push_back(std::move(msg)); }
  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[noreturn]] void raise() const {
    std::string msg = "invalid config:";
    for (const auto& m : items_) msg += "\n  - " + m;
    throw ConfigError(msg);
  }

private:
  std::vector<std::string> items_;
};

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where,
                           Violations& v) {
  if (!obj.is_object()) {
    v.add(where + ": expected an object");
    return;
  }
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) v.add(where + ": unknown field '" + key + "'");
  }
}

template <class T>
std::optional<T> read_field(const json& obj, const std::string& key, const std::string& where, Violations& v) {
  if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
  const auto& node = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!node.is_number()) throw std::runtime_error("not a number");
      return node.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!node.is_number_integer()) throw std::runtime_error("not an integer");
      const auto val = node.get<long long>();
      if constexpr (std::is_unsigned_v<T>) {
        if (val < 0) throw std::runtime_error("must be nonnegative");
      }
      return static_cast<T>(val);
    } else {
      if (!node.is_string()) throw std::runtime_error("not a string");
      return node.get<std::string>();
    }
  } catch (const std::exception& e) {
    v.add(where + "." + key + ": " + e.what());
    return std::nullopt;
  }
}

}  // namespace detail

/// Parses and validates a config document. Every violation is collected and
/// reported in one ConfigError.
inline RunConfig parse_config(const nlohmann::json& doc) {
  using detail::read_field;
  detail::Violations bad;
  RunConfig cfg;
  detail::reject_unknown(doc, {"dimension", "kernel", "confinement", "discretization", "constraint", "init",
                               "solver", "output"},
                         "config", bad);
  if (!doc.is_object()) bad.raise();

  if (auto n = read_field<int>(doc, "dimension", "config", bad)) cfg.dim = *n;
  if (cfg.dim < 1) bad.add("config.dimension: must be >= 1");

  // discretization first: it decides the solver defaults
  std::string disc_type = "radial";
  if (doc.contains("discretization")) {
    const auto& d = doc.at("discretization");
    if (auto t = read_field<std::string>(d, "type", "discretization", bad)) disc_type = *t;
    if (disc_type == "particles") {
      detail::reject_unknown(d, {"type", "count", "radius", "seed"}, "discretization", bad);
      ParticleSpec p;
      if (auto c = read_field<std::size_t>(d, "count", "discretization", bad)) p.count = *c;
      if (auto r = read_field<double>(d, "radius", "discretization", bad)) p.radius = *r;
      if (auto s = read_field<std::uint64_t>(d, "seed", "discretization", bad)) p.seed = *s;
      if (p.count < 1) bad.add("discretization.count: need at least one particle");
      if (!(p.radius > 0.0)) bad.add("discretization.radius: must be positive");
      cfg.discretization = p;
    } else if (disc_type == "radial") {
      detail::reject_unknown(d, {"type", "cells", "rmax"}, "discretization", bad);
      RadialSpec r;
      if (auto c = read_field<std::size_t>(d, "cells", "discretization", bad)) r.cells = *c;
      if (auto x = read_field<double>(d, "rmax", "discretization", bad)) r.rmax = *x;
      if (r.cells < 1) bad.add("discretization.cells: need at least one cell");
      if (!(r.rmax > 0.0)) bad.add("discretization.rmax: must be positive");
      cfg.discretization = r;
    } else if (disc_type == "line") {
      detail::reject_unknown(d, {"type", "cells", "halfwidth"}, "discretization", bad);
      LineSpec l;
      if (auto c = read_field<std::size_t>(d, "cells", "discretization", bad)) l.cells = *c;
      if (auto x = read_field<double>(d, "halfwidth", "discretization", bad)) l.halfwidth = *x;
      if (l.cells < 1) bad.add("discretization.cells: need at least one cell");
      if (!(l.halfwidth > 0.0)) bad.add("discretization.halfwidth: must be positive");
      cfg.discretization = l;
    } else {
      bad.add("discretization.type: expected particles, radial or line, got '" + disc_type + "'");
    }
  }
  cfg.solver = cfg.is_particles() ? SolverConfig::particle_defaults() : SolverConfig::density_defaults();

  // Without a kernel section: q = 2 with the Newtonian p = 2 - N where that is
  // admissible, else p = -1/2.
  cfg.kernel = PowerLawKernel{cfg.dim > 2 ? 2.0 - cfg.dim : -0.5, 2.0};
  if (doc.contains("kernel")) {
    const auto& k = doc.at("kernel");
    const auto type = read_field<std::string>(k, "type", "kernel", bad).value_or("power_law");
    if (type == "power_law") {
      detail::reject_unknown(k, {"type", "p", "q"}, "kernel", bad);
      auto pl = std::get<PowerLawKernel>(cfg.kernel);
      if (auto p = read_field<double>(k, "p", "kernel", bad)) pl.p = *p;
      if (auto q = read_field<double>(k, "q", "kernel", bad)) pl.q = *q;
      try {
        pl.validate(cfg.dim);
      } catch (const ConfigError& e) {
        bad.add(std::string("kernel: ") + e.what());
      }
      cfg.kernel = pl;
    } else if (type == "exponential") {
      detail::reject_unknown(k, {"type"}, "kernel", bad);
      cfg.kernel = ExponentialKernel{};
    } else {
      bad.add("kernel.type: expected power_law or exponential, got '" + type + "'");
    }
  }

  if (doc.contains("confinement")) {
    const auto& c = doc.at("confinement");
    const auto type = read_field<std::string>(c, "type", "confinement", bad).value_or("quadratic");
    if (type == "none") {
      detail::reject_unknown(c, {"type"}, "confinement", bad);
      cfg.confinement = Confinement::none();
    } else if (type == "quadratic") {
      detail::reject_unknown(c, {"type", "beta"}, "confinement", bad);
      const double beta = read_field<double>(c, "beta", "confinement", bad).value_or(1.0);
      if (!(beta >= 0.0) || !std::isfinite(beta)) {
        bad.add("confinement.beta: must be finite and >= 0");
      } else {
        cfg.confinement = Confinement::quadratic(beta);
      }
    } else {
      bad.add("confinement.type: expected none or quadratic, got '" + type + "'");
    }
  }

  if (doc.contains("constraint")) {
    const auto& c = doc.at("constraint");
    detail::reject_unknown(c, {"M", "m"}, "constraint", bad);
    if (auto v = read_field<double>(c, "M", "constraint", bad)) cfg.cap = *v;
    if (auto v = read_field<double>(c, "m", "constraint", bad)) cfg.mass = *v;
  }
  if (!(cfg.cap > 0.0)) bad.add("constraint.M: must be positive");
  if (!(cfg.mass > 0.0)) bad.add("constraint.m: must be positive");

  if (doc.contains("init")) {
    const auto s = read_field<std::string>(doc, "init", "config", bad).value_or("constant");
    if (s == "constant") {
      cfg.init = InitKind::constant;
    } else if (s == "analytic") {
      cfg.init = InitKind::analytic;
    } else {
      bad.add("config.init: expected constant or analytic, got '" + s + "'");
    }
  }

  if (doc.contains("solver")) {
    const auto& s = doc.at("solver");
    detail::reject_unknown(s, {"max_iters", "step0", "armijo_shrink", "armijo_slope", "tol_energy", "tol_residual"},
                           "solver", bad);
    if (auto v = read_field<int>(s, "max_iters", "solver", bad)) cfg.solver.max_iters = *v;
    if (auto v = read_field<double>(s, "step0", "solver", bad)) cfg.solver.step0 = *v;
    if (auto v = read_field<double>(s, "armijo_shrink", "solver", bad)) cfg.solver.armijo_shrink = *v;
    if (auto v = read_field<double>(s, "armijo_slope", "solver", bad)) cfg.solver.armijo_slope = *v;
    if (auto v = read_field<double>(s, "tol_energy", "solver", bad)) cfg.solver.tol_energy = *v;
    if (auto v = read_field<double>(s, "tol_residual", "solver", bad)) cfg.solver.tol_residual = *v;
    try {
      cfg.solver.validate();
    } catch (const ConfigError& e) {
      bad.add(e.what());
    }
  }

  if (auto o = read_field<std::string>(doc, "output", "config", bad)) cfg.output = *o;

  // Cross-field consistency.
  const bool exponential = std::holds_alternative<ExponentialKernel>(cfg.kernel);
  if (std::holds_alternative<RadialSpec>(cfg.discretization)) {
    if (!is_newtonian_quadratic(cfg.kernel, cfg.dim)) {
      bad.add("kernel/discretization mismatch: radial grids need N > 2 and power_law with q = 2, p = 2 - N");
    }
  } else if (std::holds_alternative<LineSpec>(cfg.discretization)) {
    if (cfg.dim != 1) bad.add("kernel/discretization mismatch: line grids need dimension 1");
    if (const auto* pl = std::get_if<PowerLawKernel>(&cfg.kernel); pl && !(pl->p > -1.0)) {
      bad.add("kernel/discretization mismatch: line grids need p > -1");
    }
  } else if (exponential) {
    bad.add("kernel/discretization mismatch: the exponential kernel is only used on line grids");
  }
  if (cfg.init == InitKind::analytic) {
    const bool ball = std::holds_alternative<RadialSpec>(cfg.discretization);
    const bool bt = std::holds_alternative<LineSpec>(cfg.discretization) && exponential &&
                    cfg.confinement.kind() == Confinement::Kind::quadratic && cfg.confinement.beta() > 0.0;
    if (!ball && !bt) bad.add("config.init: 'analytic' needs a radial grid, or a line grid with the exponential "
                              "kernel and beta > 0");
  }

  // Feasibility of D_{M,m} on the computational domain.
  if (cfg.cap > 0.0 && cfg.mass > 0.0 && cfg.dim >= 1) {
    if (const auto* r = std::get_if<RadialSpec>(&cfg.discretization); r && r->rmax > 0.0) {
      const double capacity = cfg.cap * unit_ball_volume(cfg.dim) * std::pow(r->rmax, cfg.dim);
      if (capacity < cfg.mass) bad.add("constraint: infeasible, M * |B(0, rmax)| < m");
    }
    if (const auto* l = std::get_if<LineSpec>(&cfg.discretization); l && l->halfwidth > 0.0) {
      if (cfg.cap * 2.0 * l->halfwidth < cfg.mass) bad.add("constraint: infeasible, M * 2L < m");
    }
  }

  if (!bad.empty()) bad.raise();

  if (std::holds_alternative<RadialSpec>(cfg.discretization)) {
    const double need = (cfg.mass + 2.0 * cfg.confinement.beta()) / unit_ball_volume(cfg.dim);
    if (cfg.cap < need) {
      cfg.warnings.push_back("M = " + std::to_string(cfg.cap) + " is below (m + 2 beta) / w_N = " +
                             std::to_string(need) + "; the uniform-ball minimizer is not admissible");
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

/// Full config with every default spelled out; parse_config(to_json(c)) == c.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["dimension"] = c.dim;
  if (const auto* pl = std::get_if<PowerLawKernel>(&c.kernel)) {
    j["kernel"] = {{"type", "power_law"}, {"p", pl->p}, {"q", pl->q}};
  } else {
    j["kernel"] = {{"type", "exponential"}};
  }
  if (c.confinement.kind() == Confinement::Kind::none) {
    j["confinement"] = {{"type", "none"}};
  } else {
    j["confinement"] = {{"type", "quadratic"}, {"beta", c.confinement.beta()}};
  }
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ParticleSpec>) {
          j["discretization"] = {{"type", "particles"}, {"count", d.count}, {"radius", d.radius}, {"seed", d.seed}};
        } else if constexpr (std::is_same_v<T, RadialSpec>) {
          j["discretization"] = {{"type", "radial"}, {"cells", d.cells}, {"rmax", d.rmax}};
        } else {
          j["discretization"] = {{"type", "line"}, {"cells", d.cells}, {"halfwidth", d.halfwidth}};
        }
      },
      c.discretization);
  j["constraint"] = {{"M", c.cap}, {"m", c.mass}};
  j["init"] = c.init == InitKind::analytic ? "analytic" : "constant";
  j["solver"] = {{"max_iters", c.solver.max_iters},         {"step0", c.solver.step0},
                 {"armijo_shrink", c.solver.armijo_shrink}, {"armijo_slope", c.solver.armijo_slope},
                 {"tol_energy", c.solver.tol_energy},       {"tol_residual", c.solver.tol_residual}};
  j["output"] = c.output;
  return j;
}

}  // namespace aggmin
