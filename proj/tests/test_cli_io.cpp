#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "perflow/cli.hpp"
#include "support.hpp"

using namespace perflow;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("perflow-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "perflow");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    err_.str("");
    return cli::run(static_cast<int>(argv.size()), argv.data(), err_);
  }

  std::string out() const { return (dir_ / "out").string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream err_;
};

TEST_F(CliTest, SimulateWritesTrajectoryAndSummary) {
  ASSERT_EQ(run({"simulate", "--flow", "rgd", "--x0", "0.5", "--out", out()}), 0) << err_.str();
  const auto csv = slurp(fs::path(out()) / cli::trajectory_csv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x_0");
  const auto summary = read_json(fs::path(out()) / cli::summary_json);
  EXPECT_EQ(summary["terminal_status"], "converged-to-equilibrium");
  EXPECT_NEAR(summary["final_state"][0].get<double>(), 1.0, 1e-8);
  EXPECT_EQ(summary["config"]["x0"], 0.5);
}

TEST_F(CliTest, DiscreteRunsAreByteIdentical) {
  const std::vector<std::string> args = {"simulate", "--flow", "discrete-rgd", "--noise", "bernoulli:50",
                                         "--seed", "7", "--steps", "3000", "--schedule", "inverse",
                                         "--x0", "0.8", "--out", out()};
  ASSERT_EQ(run(args), 0) << err_.str();
  const auto first = slurp(fs::path(out()) / cli::trajectory_csv);
  ASSERT_EQ(run(args), 0);
  EXPECT_EQ(first, slurp(fs::path(out()) / cli::trajectory_csv));
  auto other = args;
  other[6] = "8";
  ASSERT_EQ(run(other), 0);
  EXPECT_NE(first, slurp(fs::path(out()) / cli::trajectory_csv));
}

TEST_F(CliTest, BasinsAndEquilibria) {
  ASSERT_EQ(run({"basins", "--flow", "prm", "--grid", "201", "--out", out()}), 0) << err_.str();
  const auto bounds = slurp(fs::path(out()) / cli::boundaries_csv);
  EXPECT_EQ(bounds.substr(0, bounds.find('\n')), "left_label,right_label,left_x,right_x,boundary");
  EXPECT_NE(bounds.find("0,2,0.39"), std::string::npos);
  const auto eq = read_json(fs::path(out()) / cli::equilibria_json);
  EXPECT_EQ(eq["equilibria"].size(), 3u);
  EXPECT_TRUE(eq["resolution_limited"].get<bool>());

  ASSERT_EQ(run({"equilibria", "--flow", "rgd", "--out", out()}), 0);
  const auto rgd = read_json(fs::path(out()) / cli::equilibria_json);
  EXPECT_NEAR(rgd["equilibria"][1]["location"][0].get<double>(), 0.22736001524530494, 1e-12);
}

TEST_F(CliTest, CertifyBoundsAlignRepro) {
  ASSERT_EQ(run({"certify", "--r", "0.39", "--out", out()}), 0) << err_.str();
  const auto cert = read_json(fs::path(out()) / cli::certificate_json);
  EXPECT_TRUE(cert["certificate"]["valid"].get<bool>());
  EXPECT_TRUE(fs::exists(fs::path(out()) / cli::constants_sweep_csv));

  ASSERT_EQ(run({"bounds", "--r", "0.05", "--x0", "0.03", "--theta", "0.25", "--out", out()}), 0) << err_.str();
  const auto b = read_json(fs::path(out()) / cli::bounds_json);
  EXPECT_TRUE(b["report"]["admissible"].get<bool>());
  EXPECT_TRUE(b["simulation"]["contained"].get<bool>());

  ASSERT_EQ(run({"align", "--grid", "1001", "--out", out()}), 0) << err_.str();
  const auto a = read_json(fs::path(out()) / cli::alignment_json);
  EXPECT_EQ(a["points"], 1001);
  EXPECT_FALSE(a["failing_intervals"].empty());

  ASSERT_EQ(run({"repro", "constants", "--out", out()}), 0) << err_.str();
  const auto c = read_json(fs::path(out()) / cli::constants_json);
  EXPECT_NEAR(c["rgd_crossing"].get<double>(), 0.2273600152453049, 1e-12);
  EXPECT_NEAR(c["prm_crossing"].get<double>(), 0.3989659322419099, 1e-12);
  EXPECT_NEAR(c["c1"].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(c["feasible_radius"].get<double>(), 0.2123, 1e-3);
  EXPECT_EQ(c["argmax_feasible_radius_r"], 0.4);

  ASSERT_EQ(run({"repro", "fig1", "--out", out()}), 0);
  const auto fig1 = slurp(fs::path(out()) / cli::fig1_csv);
  EXPECT_EQ(std::count(fig1.begin(), fig1.end(), '\n'), 2002);
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
  const fs::path cfg = dir_ / "cfg.json";
  std::ofstream(cfg) << R"({"flow": "prm", "x0": 0.35, "t_end": 5.0})";
  ASSERT_EQ(run({"simulate", "--config", cfg.string(), "--x0", "0.45", "--out", out()}), 0) << err_.str();
  const auto summary = read_json(fs::path(out()) / cli::summary_json);
  EXPECT_EQ(summary["config"]["x0"], 0.45);
  EXPECT_EQ(summary["config"]["flow"], "prm");
  EXPECT_EQ(summary["kind"], "prm-flow");
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"simulate", "--x0", "abc", "--out", out()}), 2);
  EXPECT_EQ(run({"simulate", "--x0", "3.0", "--out", out()}), 2);
  EXPECT_EQ(run({"simulate", "--bogus", "1"}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"bounds", "--theta", "1.5", "--out", out()}), 2);
  EXPECT_EQ(run({"simulate", "--noise", "laplace:1", "--out", out()}), 2);
  EXPECT_EQ(run({"simulate", "--model", "bernoulli-squared", "--shift-kind", "logistic", "--shift-params", "1",
                 "--out", out()}),
            2);
  EXPECT_EQ(run({"simulate", "--config", (dir_ / "missing.json").string()}), 2);

  const fs::path unknown = dir_ / "unknown.json";
  std::ofstream(unknown) << R"({"x1": 0.3})";
  EXPECT_EQ(run({"simulate", "--config", unknown.string()}), 2);
  EXPECT_NE(err_.str().find("x1"), std::string::npos);

  EXPECT_EQ(run({"certify", "--x-star", "0.5", "--out", out()}), 3);
  EXPECT_EQ(run({"certify", "--x-star", "0.5", "--out", out()}), 3);

  const fs::path blocker = dir_ / "file";
  std::ofstream(blocker) << "x";
  EXPECT_EQ(run({"simulate", "--out", (blocker / "sub").string()}), 1);
}

TEST_F(CliTest, BinaryExitStatus) {
  const std::string cmd = std::string(PERFLOW_BINARY) + " simulate --x0 nope > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
}

TEST(Config, RoundTrip) {
  Json doc = {{"model", "bernoulli-squared"}, {"shift.kind", "logistic"}, {"shift.params", {6.0, 0.4}},
              {"domain", {-1.0, 2.0}},        {"flow", "discrete-rgd"},   {"x0", 0.8},
              {"steps", 100},                 {"schedule", "inverse"},    {"alpha_a", 0.5},
              {"alpha_b", 10.0},              {"noise", "gaussian:0.1"},  {"seed", 3},
              {"grid", 501},                  {"theta", 0.3},             {"fit_mode", "epsilon-capped"},
              {"epsilon_cap", 0.2},           {"target", "fig2"},         {"out", "somewhere"}};
  const auto cfg = ExperimentConfig::from_json(doc);
  const auto back = ExperimentConfig::from_json(cfg.to_json());
  EXPECT_EQ(cfg.to_json(), back.to_json());
  EXPECT_EQ(cfg.to_json().size(), doc.size());
  EXPECT_EQ(cfg.build_model().name(), "bernoulli-squared/logistic");
  EXPECT_EQ(cfg.noise_spec().mode, NoiseSpec::Mode::gaussian);
  EXPECT_DOUBLE_EQ(cfg.step_schedule()(0), 0.05);
}

TEST(Config, Validation) {
  EXPECT_THROW(ExperimentConfig::from_json(Json::array()), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"x0", "zero"}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"steps", 1.5}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"flow", "sideways"}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"domain", {1.0, 0.0}}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"shift.kind", "logistic"}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"model", "bernoulli-squared"}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"x_star", 9.0}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"alpha_b", 0.5}}), ConfigError);
  EXPECT_NO_THROW(ExperimentConfig::from_json(Json::object()));
}

TEST(Noise, Parsing) {
  EXPECT_EQ(parse_noise("none", 0).mode, NoiseSpec::Mode::none);
  const auto g = parse_noise("gaussian:0.25", 4);
  EXPECT_EQ(g.mode, NoiseSpec::Mode::gaussian);
  EXPECT_EQ(g.sigma, 0.25);
  EXPECT_EQ(g.seed, 4u);
  const auto b = parse_noise("bernoulli:100", 1);
  EXPECT_EQ(b.batch, 100u);
  for (const char* bad : {"gaussian", "gaussian:x", "bernoulli:0", "bernoulli:2.5", "poisson:1"}) {
    EXPECT_THROW(parse_noise(bad, 0), ConfigError) << bad;
  }
}

TEST(Format, DoublesRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 0.22736001524530494, 1e22}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(INFINITY), "inf");
  EXPECT_EQ(format_double(-INFINITY), "-inf");
  EXPECT_EQ(json_number(INFINITY), "inf");
}

}  // namespace
