#pragma once

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "aggmin/analytic.hpp"
#include "aggmin/config.hpp"
#include "aggmin/discretization.hpp"
#include "aggmin/energy.hpp"
#include "aggmin/euler_lagrange.hpp"
#include "aggmin/minimize.hpp"

namespace aggmin {

using AnyState = std::variant<ParticleEnsemble, RadialDensity, LineDensity>;

/// Shortest decimal string that reads back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

inline AnyState make_initial_state(const RunConfig& cfg) {
  if (const auto* p = std::get_if<ParticleSpec>(&cfg.discretization)) {
    SeededRng rng(p->seed);
    const std::vector<double> center(static_cast<std::size_t>(cfg.dim), 0.0);
    return sample_uniform_ball(rng, p->count, p->radius, center, cfg.dim, cfg.mass);
  }
  if (const auto* r = std::get_if<RadialSpec>(&cfg.discretization)) {
    auto grid = std::make_shared<const RadialGrid>(cfg.dim, r->rmax, r->cells);
    if (cfg.init == InitKind::analytic) {
      const auto ball = ball_solution(cfg.dim, cfg.mass, cfg.confinement.beta());
      return RadialDensity::uniform_ball(grid, ball.r0, std::min(ball.height, cfg.cap), cfg.cap);
    }
    const double level = cfg.mass / (unit_ball_volume(cfg.dim) * std::pow(r->rmax, cfg.dim));
    return RadialDensity::constant(grid, std::min(level, cfg.cap), cfg.cap);
  }
  const auto& l = std::get<LineSpec>(cfg.discretization);
  if (cfg.init == InitKind::analytic) {
    const double beta = cfg.confinement.beta();
    return LineDensity::from_function(l.halfwidth, l.cells, cfg.cap, [&](double x) {
      return std::min(bt_profile(cfg.mass, beta, x), cfg.cap);
    });
  }
  const double level = std::min(cfg.mass / (2.0 * l.halfwidth), cfg.cap);
  return LineDensity::from_function(l.halfwidth, l.cells, cfg.cap, [&](double) { return level; });
}

inline EnergyBreakdown state_energy(const AnyState& s, const RunConfig& cfg, Workers workers = {}) {
  return std::visit(
      [&](const auto& st) -> EnergyBreakdown {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, ParticleEnsemble>) {
          return particle_energy(st, cfg.kernel, cfg.confinement, workers);
        } else {
          return density_energy(st, cfg.kernel, cfg.confinement, workers);
        }
      },
      s);
}

inline ELReport state_el_report(const AnyState& s, const RunConfig& cfg, double threshold, std::optional<double> tol,
                                Workers workers = {}) {
  return std::visit([&](const auto& st) { return el_verify(st, cfg.kernel, cfg.confinement, threshold, tol, workers); },
                    s);
}

/// psi aligned with the state: cell values for grids, psi_i for particles.
inline PsiField state_psi(const AnyState& s, const RunConfig& cfg, Workers workers = {}) {
  return std::visit(
      [&](const auto& st) -> PsiField {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, ParticleEnsemble>) {
          PsiField out;
          out.values = particle_psi(st, cfg.kernel, cfg.confinement, workers);
          for (std::size_t i = 0; i < st.size(); ++i) {
            const auto x = st.position(i);
            out.points.emplace_back(x.begin(), x.end());
          }
          return out;
        } else {
          return psi_on_cells(st, cfg.kernel, cfg.confinement, workers);
        }
      },
      s);
}

struct RunResult {
  AnyState final;
  Trace trace;
  EnergyBreakdown energy;
  ELReport el;
  double wall_seconds = 0.0;
};

inline RunResult run_minimize(const RunConfig& cfg, Workers workers = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const AnyState start = make_initial_state(cfg);
  RunResult out{start, {}, {}, {}, 0.0};
  std::visit(
      [&](const auto& st) {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, ParticleEnsemble>) {
          auto r = particle_flow(st, cfg.kernel, cfg.confinement, cfg.solver, workers);
          out.final = std::move(r.final);
          out.trace = std::move(r.trace);
        } else {
          auto r = density_minimize(st, cfg.kernel, cfg.confinement, cfg.mass, cfg.solver, workers);
          out.final = std::move(r.final);
          out.trace = std::move(r.trace);
        }
      },
      start);
  out.energy = state_energy(out.final, cfg, workers);
  out.el = state_el_report(out.final, cfg, kDefaultSupportThreshold, std::nullopt, workers);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string state_csv(const AnyState& s) {
  std::ostringstream out;
  std::visit(
      [&](const auto& st) {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, ParticleEnsemble>) {
          out << "id";
          for (int d = 1; d <= st.dim(); ++d) out << ",x" << d;
          out << ",weight\n";
          for (std::size_t i = 0; i < st.size(); ++i) {
            out << i;
            for (double c : st.position(i)) out << ',' << format_double(c);
            out << ',' << format_double(st.weight(i)) << '\n';
          }
        } else {
          out << (std::is_same_v<T, RadialDensity> ? "r,rho\n" : "x,rho\n");
          for (std::size_t i = 0; i < st.size(); ++i) {
            out << format_double(st.node(i)) << ',' << format_double(st.values()[i]) << '\n';
          }
        }
      },
      s);
  return out.str();
}

inline std::string trace_csv(const Trace& t) {
  std::ostringstream out;
  out << "iter,energy,step,residual,mass\n";
  for (const auto& e : t.entries) {
    out << e.iter << ',' << format_double(e.energy) << ',' << format_double(e.step) << ','
        << format_double(e.residual) << ',' << format_double(e.mass) << '\n';
  }
  return out.str();
}

inline std::string psi_csv(const AnyState& s, const PsiField& psi, double c0) {
  std::ostringstream out;
  const bool particles = std::holds_alternative<ParticleEnsemble>(s);
  const bool radial = std::holds_alternative<RadialDensity>(s);
  out << (particles ? "id" : (radial ? "r" : "x")) << ",psi,c0\n";
  for (std::size_t i = 0; i < psi.values.size(); ++i) {
    if (particles) {
      out << i;
    } else {
      out << format_double(psi.points[i][0]);
    }
    out << ',' << format_double(psi.values[i]) << ',' << format_double(c0) << '\n';
  }
  return out.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) throw ConfigError(where + ": cannot parse number '" + s + "'");
  return v;
}

}  // namespace detail

/// Reads a state.csv written for a run with the same config.
inline AnyState read_state_csv(std::istream& in, const RunConfig& cfg) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("state file: empty");
  const auto header = detail::split_csv_line(line);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cols = detail::split_csv_line(line);
    if (cols.size() != header.size()) {
      throw ConfigError("state file line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " columns");
    }
    std::vector<double> row;
    for (const auto& c : cols) row.push_back(detail::parse_double(c, "state file line " + std::to_string(lineno)));
    rows.push_back(std::move(row));
  }
  if (cfg.is_particles()) {
    const auto nd = static_cast<std::size_t>(cfg.dim);
    if (header.size() != nd + 2 || header.front() != "id" || header.back() != "weight") {
      throw ConfigError("state file: expected header id,x1,...,xN,weight for N = " + std::to_string(cfg.dim));
    }
    std::vector<double> pos;
    std::vector<double> w;
    for (const auto& r : rows) {
      pos.insert(pos.end(), r.begin() + 1, r.begin() + 1 + static_cast<std::ptrdiff_t>(nd));
      w.push_back(r.back());
    }
    return ParticleEnsemble(cfg.dim, std::move(pos), std::move(w));
  }
  const bool radial = std::holds_alternative<RadialSpec>(cfg.discretization);
  const std::string expect = radial ? "r" : "x";
  if (header.size() != 2 || header[0] != expect || header[1] != "rho") {
    throw ConfigError("state file: expected header " + expect + ",rho");
  }
  std::vector<double> values;
  for (const auto& r : rows) values.push_back(r[1]);
  const AnyState tmpl = make_initial_state(cfg);
  return std::visit(
      [&](const auto& st) -> AnyState {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, ParticleEnsemble>) {
          return st;
        } else {
          if (values.size() != st.size()) {
            throw ConfigError("state file: " + std::to_string(values.size()) + " rows but the config has " +
                              std::to_string(st.size()) + " cells");
          }
          for (std::size_t i = 0; i < values.size(); ++i) {
            if (std::abs(rows[i][0] - st.node(i)) > 1e-9 * (1.0 + std::abs(st.node(i)))) {
              throw ConfigError("state file: row " + std::to_string(i) + " is not at cell center " +
                                format_double(st.node(i)));
            }
          }
          return st.with_values(std::move(values));
        }
      },
      tmpl);
}

inline AnyState load_state(const std::string& path, const RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read state file '" + path + "'");
  return read_state_csv(in, cfg);
}

inline nlohmann::json to_json(const EnergyBreakdown& e) {
  return {{"interaction", e.interaction}, {"confinement", e.confinement}, {"total", e.total}};
}

inline nlohmann::json to_json(const ELReport& r) {
  nlohmann::json j = {{"c0", r.c0},
                      {"on_support_sup", r.on_support_sup},
                      {"support_threshold", r.support_threshold},
                      {"tol_abs", r.tol_abs},
                      {"support_cells", r.support_cells},
                      {"off_support_samples", r.off_support_samples},
                      {"pass", r.pass}};
  // JSON has no infinity; an empty complement is reported as null.
  if (std::isfinite(r.off_support_min)) {
    j["off_support_min"] = r.off_support_min;
  } else {
    j["off_support_min"] = nullptr;
  }
  return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + p.string() + "'");
}

/// Writes result.json, state.csv, trace.csv and psi.csv into `dir`.
inline void write_outputs(const RunResult& r, const RunConfig& cfg, const std::filesystem::path& dir,
                          Workers workers = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + dir.string() + "'");
  }
  const auto rep = convergence_report(r.trace);
  nlohmann::json res;
  res["config"] = to_json(cfg);
  res["warnings"] = cfg.warnings;
  res["energy"] = to_json(r.energy);
  res["euler_lagrange"] = to_json(r.el);
  res["termination"] = to_string(r.trace.reason);
  res["iterations"] = rep.iterations;
  res["monotone"] = rep.monotone;
  res["mass_drift"] = rep.mass_drift;
  res["final_residual"] = rep.final_residual;
  res["wall_time_seconds"] = r.wall_seconds;
  write_text(dir / "result.json", res.dump(2) + "\n");
  write_text(dir / "state.csv", state_csv(r.final));
  write_text(dir / "trace.csv", trace_csv(r.trace));
  write_text(dir / "psi.csv", psi_csv(r.final, state_psi(r.final, cfg, workers), r.el.c0));
}

}  // namespace aggmin
