// aggmin: minimize and check nonlocal interaction energies from the shell.

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "aggmin/aggmin.hpp"

namespace {

using nlohmann::json;
using namespace aggmin;

enum Exit { kOk = 0, kConfig = 1, kNumerical = 2, kNonConvergence = 3 };

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

struct Common {
  std::string config;
  std::optional<unsigned> threads;

  Workers workers() const {
    return threads ? Workers{std::max(1u, *threads)} : Workers::from_env();
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON run config")->required();
  app->add_option("--threads", c.threads, "worker threads (default: AGGMIN_THREADS or all cores)");
}

int cmd_minimize(const Common& common, const std::string& output, std::optional<int> max_iters,
                 std::optional<std::uint64_t> seed) {
  auto cfg = load_config(common.config);
  if (!output.empty()) cfg.output = output;
  if (max_iters) {
    cfg.solver.max_iters = *max_iters;
    cfg.solver.validate();
  }
  if (seed) {
    auto* p = std::get_if<ParticleSpec>(&cfg.discretization);
    if (!p) throw ConfigError("--seed applies to particle runs only");
    p->seed = *seed;
  }
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
  const auto workers = common.workers();
  const auto res = run_minimize(cfg, workers);
  write_outputs(res, cfg, cfg.output, workers);
  const auto rep = convergence_report(res.trace);
  print_json({{"output", cfg.output},
              {"termination", to_string(rep.reason)},
              {"iterations", rep.iterations},
              {"energy", to_json(res.energy)},
              {"euler_lagrange", to_json(res.el)},
              {"warnings", cfg.warnings}});
  return rep.reason == Termination::max_iters ? kNonConvergence : kOk;
}

int cmd_energy(const Common& common, const std::string& state_path) {
  const auto cfg = load_config(common.config);
  const auto state = load_state(state_path, cfg);
  print_json(to_json(state_energy(state, cfg, common.workers())));
  return kOk;
}

int cmd_verify(const Common& common, const std::string& state_path, double threshold, std::optional<double> tol,
               const std::string& psi_out) {
  const auto cfg = load_config(common.config);
  const auto state = load_state(state_path, cfg);
  const auto rep = state_el_report(state, cfg, threshold, tol, common.workers());
  if (!psi_out.empty()) write_text(psi_out, psi_csv(state, state_psi(state, cfg, common.workers()), rep.c0));
  print_json(to_json(rep));
  return kOk;
}

int cmd_hls(double gamma, int n, std::size_t cells) {
  json out = {{"gamma", gamma}, {"n", n}, {"constant", hls_sharp_constant(gamma, n)}};
  // Inequality check on a sample admissible state: an indicator of half the domain.
  const double cap = 1.0;
  std::optional<HlsReport> rep;
  if (n == 1) {
    rep = hls_check(LineDensity::from_function(1.0, cells, cap, [](double x) { return std::abs(x) < 0.5 ? 1.0 : 0.0; }),
                    gamma);
  } else if (n == 3 || (n > 2 && gamma == 2.0 - n)) {
    auto g = std::make_shared<const RadialGrid>(n, 1.0, cells);
    rep = hls_check(RadialDensity::uniform_ball(g, 0.5, 1.0, cap), gamma);
  }
  if (rep) {
    out["check"] = {{"state", n == 1 ? "indicator of [-0.5, 0.5]" : "indicator of B(0, 0.5)"},
                    {"lhs", rep->lhs},
                    {"norm_bound", rep->norm_bound},
                    {"interp_bound", rep->interp_bound},
                    {"ok", rep->ok}};
  }
  print_json(out);
  return kOk;
}

int cmd_selftest() {
  int failed = 0;
  for (const auto& r : run_selftest()) {
    std::cout << (r.pass ? "PASS  " : "FAIL  ") << r.name << "  (" << r.detail << ")\n";
    if (!r.pass) ++failed;
  }
  std::cout << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed") << '\n';
  return failed == 0 ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimize and verify nonlocal interaction energies"};
  app.require_subcommand(1);

  Common common;
  std::string output;
  std::optional<int> max_iters;
  std::optional<std::uint64_t> seed;
  auto* minimize = app.add_subcommand("minimize", "run descent per a config; writes result.json and CSVs");
  add_common(minimize, common);
  minimize->add_option("--output", output, "output directory (overrides config)");
  minimize->add_option("--max-iters", max_iters, "iteration cap (overrides config)");
  minimize->add_option("--seed", seed, "particle sampling seed (overrides config)");

  std::string state_path;
  auto* energy = app.add_subcommand("energy", "evaluate the energy of a state file");
  add_common(energy, common);
  energy->add_option("--state", state_path, "state.csv")->required();

  double threshold = kDefaultSupportThreshold;
  std::optional<double> tol;
  std::string psi_out;
  auto* verify = app.add_subcommand("verify-el", "Euler-Lagrange report for a state file");
  add_common(verify, common);
  verify->add_option("--state", state_path, "state.csv")->required();
  verify->add_option("--threshold", threshold, "support threshold relative to max rho");
  verify->add_option("--tol", tol, "absolute tolerance (default 1e-3 |c0|)");
  verify->add_option("--psi", psi_out, "also write psi profile CSV here");

  int n = 3;
  double mass = 1.0;
  double beta = 1.0;
  auto* analytic = app.add_subcommand("analytic", "closed-form reference solutions as JSON");
  analytic->require_subcommand(1);
  auto* ball = analytic->add_subcommand("ball", "uniform-ball minimizer, K = r^2/2 + r^{2-N}/(N-2)");
  ball->add_option("--n", n, "dimension N > 2");
  ball->add_option("--mass", mass, "total mass m");
  ball->add_option("--beta", beta, "confinement strength");
  auto* bt = analytic->add_subcommand("bt1d", "1D minimizer for K = exp(-|x|), F = beta x^2");
  bt->add_option("--mass", mass, "total mass m");
  bt->add_option("--beta", beta, "confinement strength");
  auto* two = analytic->add_subcommand("two-particle", "two-atom equilibrium, q = 2, p = -1, N = 3");
  two->add_option("--mass", mass, "total mass m");
  two->add_option("--beta", beta, "confinement strength");

  double gamma = -1.0;
  std::size_t cells = 256;
  auto* hls = app.add_subcommand("hls", "sharp HLS constant and a sample inequality check");
  hls->add_option("--gamma", gamma, "exponent in (-N, 0)");
  hls->add_option("--n", n, "dimension");
  hls->add_option("--cells", cells, "grid cells for the sample check");

  auto* selftest = app.add_subcommand("selftest", "run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (minimize->parsed()) return cmd_minimize(common, output, max_iters, seed);
    if (energy->parsed()) return cmd_energy(common, state_path);
    if (verify->parsed()) return cmd_verify(common, state_path, threshold, tol, psi_out);
    if (ball->parsed()) {
      const auto s = ball_solution(n, mass, beta);
      print_json({{"n", n}, {"mass", mass}, {"beta", beta}, {"r0", s.r0}, {"height", s.height}, {"c0", s.c0},
                  {"energy", ball_energy(n, mass, beta)}, {"phi0", ball_phi(0.0, n, mass, beta)}});
      return kOk;
    }
    if (bt->parsed()) {
      print_json({{"mass", mass}, {"beta", beta}, {"support", bt_support(mass, beta)},
                  {"peak", bt_profile(mass, beta, 0.0)}});
      return kOk;
    }
    if (two->parsed()) {
      const double a = two_particle_equilibrium(mass, beta);
      print_json({{"mass", mass}, {"beta", beta}, {"half_separation", a},
                  {"force_balance_residual", two_particle_force_balance(mass, beta, a)}});
      return kOk;
    }
    if (hls->parsed()) return cmd_hls(gamma, n, cells);
    if (selftest->parsed()) return cmd_selftest();
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const NumericalFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kConfig;
}
