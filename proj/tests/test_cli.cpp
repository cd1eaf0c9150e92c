#include <gtest/gtest.h>

#include <sys/wait.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "aggmin/config.hpp"
#include "aggmin/run.hpp"

using namespace aggmin;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("aggmin_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) const {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path write_config(const std::string& name, const json& j) const { return write(name, j.dump()); }

  // Runs the CLI, capturing stdout; returns the exit status.
  int run(const std::string& args, std::string* out = nullptr) const {
    const auto captured = dir_ / "stdout.txt";
    const std::string cmd = std::string(AGGMIN_CLI_PATH) + " " + args + " > " + captured.string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    if (out) *out = read(captured);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

json radial_config(int cells = 256) {
  return {{"dimension", 3},
          {"kernel", {{"type", "power_law"}, {"p", -1.0}, {"q", 2.0}}},
          {"confinement", {{"type", "quadratic"}, {"beta", 1.0}}},
          {"discretization", {{"type", "radial"}, {"cells", cells}, {"rmax", 1.5}}},
          {"constraint", {{"M", 0.75}, {"m", 1.0}}}};
}

json particle_config(int count = 40) {
  return {{"dimension", 3},
          {"kernel", {{"type", "power_law"}, {"p", -1.0}, {"q", 2.0}}},
          {"discretization", {{"type", "particles"}, {"count", count}, {"radius", 2.0}, {"seed", 7}}},
          {"solver", {{"max_iters", 5000}, {"tol_residual", 1e-6}}}};
}

std::string message_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

// --- config -------------------------------------------------------------------

TEST(Config, MinimalRadialFillsDefaults) {
  const auto cfg = parse_config(json{{"dimension", 3}});
  EXPECT_EQ(cfg.dim, 3);
  EXPECT_EQ(cfg.kernel, (Kernel{PowerLawKernel{-1.0, 2.0}}));
  EXPECT_EQ(cfg.confinement.beta(), 1.0);
  ASSERT_TRUE(std::holds_alternative<RadialSpec>(cfg.discretization));
  EXPECT_EQ(std::get<RadialSpec>(cfg.discretization).cells, 2048u);
  EXPECT_EQ(cfg.solver, SolverConfig::density_defaults());
  EXPECT_TRUE(cfg.warnings.empty());
}

TEST(Config, RoundTrip) {
  for (const json& j : {radial_config(), particle_config(),
                        json{{"dimension", 1},
                             {"kernel", {{"type", "exponential"}}},
                             {"discretization", {{"type", "line"}, {"cells", 100}, {"halfwidth", 1.5}}},
                             {"constraint", {{"M", 2.0}, {"m", 2.0}}},
                             {"init", "analytic"},
                             {"output", "somewhere"}}}) {
    const auto cfg = parse_config(j);
    EXPECT_EQ(parse_config(to_json(cfg)), cfg);
  }
}

TEST(Config, KernelDiscretizationMismatch) {
  auto j = radial_config();
  j["kernel"] = {{"type", "exponential"}};
  EXPECT_NE(message_of(j).find("kernel/discretization mismatch"), std::string::npos) << message_of(j);
  j = radial_config();
  j["kernel"]["p"] = -0.5;
  EXPECT_NE(message_of(j).find("kernel/discretization mismatch"), std::string::npos);
}

TEST(Config, ListsEveryViolation) {
  auto j = radial_config();
  j["bogus"] = 1;
  j["solver"] = {{"max_iters", 0}};
  j["constraint"]["m"] = -1.0;
  const auto msg = message_of(j);
  EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
  EXPECT_NE(msg.find("max_iters"), std::string::npos) << msg;
  EXPECT_NE(msg.find("constraint.m"), std::string::npos) << msg;
}

TEST(Config, InfeasibleConstraintRejected) {
  auto j = radial_config();
  j["constraint"]["M"] = 0.01;
  EXPECT_NE(message_of(j).find("infeasible"), std::string::npos) << message_of(j);
}

TEST(Config, WarnsBelowTheBallHeight) {
  auto j = radial_config();
  j["constraint"]["M"] = 0.5;
  const auto cfg = parse_config(j);
  ASSERT_EQ(cfg.warnings.size(), 1u);
  EXPECT_NE(cfg.warnings[0].find("M"), std::string::npos);
}

TEST(Config, MalformedFile) {
  const auto p = fs::temp_directory_path() / "aggmin_malformed.json";
  std::ofstream(p) << "{ not json";
  EXPECT_THROW(load_config(p.string()), ConfigError);
  fs::remove(p);
  EXPECT_THROW(load_config("/nonexistent/aggmin.json"), ConfigError);
}

// --- CSV ----------------------------------------------------------------------

TEST(Csv, ShortestRoundTripFormatting) {
  for (double x : {0.1, 1.0 / 3.0, 2.5e-300, -7.0, 1e22}) {
    const auto s = format_double(x);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, x) << s;
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Csv, HeadersAndRoundTrip) {
  const auto pcfg = parse_config(particle_config(5));
  const AnyState particles = make_initial_state(pcfg);
  const auto ptext = state_csv(particles);
  EXPECT_EQ(ptext.substr(0, ptext.find('\n')), "id,x1,x2,x3,weight");
  std::istringstream pin(ptext);
  EXPECT_EQ(state_csv(read_state_csv(pin, pcfg)), ptext);

  const auto rcfg = parse_config(radial_config(16));
  const AnyState radial = make_initial_state(rcfg);
  const auto rtext = state_csv(radial);
  EXPECT_EQ(rtext.substr(0, rtext.find('\n')), "r,rho");
  std::istringstream rin(rtext);
  EXPECT_EQ(state_csv(read_state_csv(rin, rcfg)), rtext);

  Trace t;
  t.entries.push_back({0, 1.0, 0.0, 0.5, 1.0});
  EXPECT_EQ(trace_csv(t), "iter,energy,step,residual,mass\n0,1,0,0.5,1\n");
}

TEST(Csv, RejectsMismatchedGrid) {
  const auto rcfg = parse_config(radial_config(16));
  std::istringstream in("r,rho\n0.1,0.2\n");
  EXPECT_THROW(read_state_csv(in, rcfg), ConfigError);
}

// --- the executable -----------------------------------------------------------

TEST_F(CliTest, AnalyticBall) {
  std::string out;
  ASSERT_EQ(run("analytic ball --n 3 --mass 1 --beta 1", &out), 0);
  const auto j = json::parse(out);
  EXPECT_NEAR(j["r0"].get<double>(), 0.693361, 1e-6);
  EXPECT_NEAR(j["height"].get<double>(), 0.716197, 1e-6);
  EXPECT_NEAR(j["c0"].get<double>(), 2.307602, 5e-6);
}

TEST_F(CliTest, AnalyticOthers) {
  std::string out;
  ASSERT_EQ(run("analytic bt1d --mass 2 --beta 1", &out), 0);
  EXPECT_NEAR(json::parse(out)["support"].get<double>(), 0.587401, 1e-6);
  ASSERT_EQ(run("analytic two-particle", &out), 0);
  EXPECT_NEAR(json::parse(out)["half_separation"].get<double>(), 0.3466806, 1e-7);
  EXPECT_EQ(run("analytic ball --n 2"), 1);
}

TEST_F(CliTest, HlsConstant) {
  std::string out;
  ASSERT_EQ(run("hls --gamma -1 --n 3", &out), 0);
  const auto j = json::parse(out);
  EXPECT_NEAR(j["constant"].get<double>(), 2.294010703541599, 1e-12);
  EXPECT_TRUE(j["check"]["ok"].get<bool>());
  EXPECT_EQ(run("hls --gamma 1 --n 3"), 1);
}

TEST_F(CliTest, ConfigErrorsExitOne) {
  EXPECT_EQ(run("minimize --config " + (dir_ / "missing.json").string()), 1);
  EXPECT_EQ(run("minimize --config " + write("bad.json", "{").string()), 1);
  auto j = radial_config();
  j["kernel"] = {{"type", "exponential"}};
  EXPECT_EQ(run("minimize --config " + write_config("mismatch.json", j).string()), 1);
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run(""), 1);
}

TEST_F(CliTest, UnwritableOutputExitsOne) {
  const auto blocker = write("blocker", "x");
  auto j = radial_config(64);
  j["output"] = (blocker / "sub").string();
  EXPECT_EQ(run("minimize --config " + write_config("c.json", j).string()), 1);
}

TEST_F(CliTest, MaxItersExitsThree) {
  const auto cfg = write_config("c.json", radial_config(64));
  EXPECT_EQ(run("minimize --config " + cfg.string() + " --max-iters 2 --output " + (dir_ / "o").string()), 3);
  EXPECT_TRUE(fs::exists(dir_ / "o" / "trace.csv"));
}

TEST_F(CliTest, CollisionExitsTwo) {
  const auto cfg = write_config("c.json", particle_config(2));
  const auto state = write("s.csv", "id,x1,x2,x3,weight\n0,0.5,0,0,0.5\n1,0.5,0,0,0.5\n");
  EXPECT_EQ(run("energy --config " + cfg.string() + " --state " + state.string()), 2);
}

TEST_F(CliTest, MinimizeWritesOutputsAndTheyAreReusable) {
  const auto cfg = write_config("c.json", radial_config(256));
  const auto out = dir_ / "run";
  std::string stdout_text;
  ASSERT_EQ(run("minimize --config " + cfg.string() + " --output " + out.string(), &stdout_text), 0);
  for (const char* f : {"result.json", "state.csv", "trace.csv", "psi.csv"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto result = json::parse(read(out / "result.json"));
  EXPECT_TRUE(result["euler_lagrange"]["pass"].get<bool>());
  EXPECT_EQ(read(out / "psi.csv").substr(0, 9), "r,psi,c0\n");

  std::string energy_text;
  ASSERT_EQ(run("energy --config " + cfg.string() + " --state " + (out / "state.csv").string(), &energy_text), 0);
  EXPECT_EQ(json::parse(energy_text)["total"].get<double>(), result["energy"]["total"].get<double>());

  std::string el_text;
  ASSERT_EQ(run("verify-el --config " + cfg.string() + " --state " + (out / "state.csv").string() + " --psi " +
                    (dir_ / "psi2.csv").string(),
                &el_text),
            0);
  EXPECT_TRUE(json::parse(el_text)["pass"].get<bool>());
  EXPECT_EQ(read(dir_ / "psi2.csv"), read(out / "psi.csv"));
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  const auto cfg = write_config("c.json", particle_config(60));
  const auto a = dir_ / "a";
  const auto b = dir_ / "b";
  ASSERT_EQ(run("minimize --config " + cfg.string() + " --threads 1 --output " + a.string()), 0);
  ASSERT_EQ(run("minimize --config " + cfg.string() + " --threads 4 --output " + b.string()), 0);
  for (const char* f : {"state.csv", "trace.csv", "psi.csv"}) EXPECT_EQ(read(a / f), read(b / f)) << f;
  ASSERT_EQ(run("minimize --config " + cfg.string() + " --seed 8 --output " + b.string()), 0);
  EXPECT_NE(read(a / "state.csv"), read(b / "state.csv"));
}

TEST_F(CliTest, RoundTripOfTheEchoedConfig) {
  const auto cfg = write_config("c.json", radial_config(64));
  const auto out = dir_ / "run";
  ASSERT_EQ(run("minimize --config " + cfg.string() + " --output " + out.string()), 0);
  const auto echoed = json::parse(read(out / "result.json"))["config"];
  auto original = load_config(cfg.string());
  original.output = out.string();
  EXPECT_EQ(parse_config(echoed), original);
}

TEST_F(CliTest, Selftest) {
  std::string out;
  EXPECT_EQ(run("selftest", &out), 0);
  EXPECT_NE(out.find("all checks passed"), std::string::npos) << out;
}
