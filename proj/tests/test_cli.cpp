#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "polycascade/study.hpp"

using namespace polycascade;
namespace fs = std::filesystem;

namespace {

StudyConfig small_config() {
  return parse_config_string(
      "beta = 1.5\n"
      "m_list = 1,2,4\n"
      "n_list = 4,8\n"
      "replicas = 500\n"
      "theta_grid_size = 6\n"
      "seed = 99\n");
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("polycascade_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(POLYCASCADE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsMatchBoundsModule) {
  const StudyConfig c;
  EXPECT_EQ(c.m_list, (std::vector<int>{1, 2, 4, 8, 16, 32}));
  EXPECT_EQ(c.n_list, (std::vector<int>{4, 8, 16, 32, 64}));
  EXPECT_EQ(c.replicas, 100000u);
  EXPECT_EQ(c.theta_min, 0.01);
  EXPECT_EQ(c.golden_tolerance, 1e-3);
}

TEST(Config, ParsesKeysCommentsAndLists) {
  const auto c = parse_config_string(
      "# comment\n"
      "env.family = uniform   # trailing\n"
      "env.params = -1, 2\n"
      "\n"
      "d = 2\n"
      "beta_grid = 0.5,1,2\n"
      "beta_c.interval = 0.2, 1.5\n"
      "cascade.law = polymer\n");
  EXPECT_EQ(c.family, "uniform");
  EXPECT_EQ(c.params, (std::vector<double>{-1, 2}));
  EXPECT_EQ(c.d, 2);
  EXPECT_EQ(c.betas, (std::vector<double>{0.5, 1, 2}));
  EXPECT_EQ(c.beta_c_lo, 0.2);
  EXPECT_EQ(c.beta_c_hi, 1.5);
  EXPECT_EQ(c.cascade_law, "polymer");
  EXPECT_EQ(c.model().name(), "uniform");
}

TEST(Config, ErrorsCarryLineNumbers) {
  auto message = [](const std::string& text) {
    try {
      parse_config_string(text);
    } catch (const UsageError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("beta = 1\nreplicas = 10x\n").find("config:2:"), std::string::npos);
  EXPECT_NE(message("\n\nnot a setting\n").find("config:3:"), std::string::npos);
  EXPECT_NE(message("colour = blue\n").find("unknown configuration key 'colour'"), std::string::npos);
  EXPECT_NE(message("d = 4\n").find("config:1:"), std::string::npos);
  EXPECT_NE(message("theta_min = 1.5\n").find("theta_min"), std::string::npos);
}

TEST(Config, EchoRoundTrips) {
  auto c = small_config();
  c.family = "bernoulli";
  c.params = {0.3, -1.0 / 3.0, 2.0};
  c.betas = {0.1, 1.0 / 7.0};
  c.workers = 4;
  const std::string echo = echo_config(c);
  EXPECT_EQ(echo.find("workers"), std::string::npos);
  const auto back = parse_config_string(echo);
  EXPECT_EQ(echo_config(back), echo);
  EXPECT_EQ(back.params, c.params);
  EXPECT_EQ(back.betas, c.betas);
}

TEST(Commands, BoundZeroTemperatureIsAllZero) {
  auto c = small_config();
  c.betas = {0.0};
  const auto files = cmd_bound(c);
  const auto report = nlohmann::json::parse(files.at("report.json"));
  const auto& study = report["studies"][0];
  for (const auto& row : study["rows"]) EXPECT_NEAR(row["p_tree_per_step"].get<double>(), 0.0, 1e-12);
  for (const auto& row : study["lower_rows"]) EXPECT_NEAR(row["mean_log_w_per_step"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(study["running_inf"].get<double>(), 0.0, 1e-12);
  EXPECT_TRUE(study["certificate"].is_null());
  EXPECT_TRUE(files.count("curves.csv"));
  EXPECT_TRUE(files.count("tree_rows.csv"));
  EXPECT_TRUE(files.count("lower_rows.csv"));
}

TEST(Commands, ByteIdenticalAcrossRunsAndWorkers) {
  auto c = small_config();
  const auto first = cmd_bound(c);
  const auto again = cmd_bound(c);
  c.workers = 3;
  const auto threaded = cmd_bound(c);
  EXPECT_EQ(first, again);
  EXPECT_EQ(first, threaded);

  auto o = small_config();
  o.overlap_n = 12;
  o.overlap_slabs = 7;
  const auto overlap = cmd_overlap(o);
  o.workers = 4;
  EXPECT_EQ(overlap, cmd_overlap(o));
}

TEST(Commands, EchoedConfigReproducesReport) {
  const auto c = small_config();
  const auto files = cmd_bound(c);
  const auto report = nlohmann::json::parse(files.at("report.json"));
  const auto rerun = cmd_bound(parse_config_string(report["config"].get<std::string>()));
  EXPECT_EQ(files, rerun);
}

TEST(Commands, CascadeUniformWeightsGiveZero) {
  auto c = small_config();
  c.cascade_law = "uniform";
  c.cascade_n = 3;
  c.cascade_depths = {1, 2, 5, 9};
  const auto report = nlohmann::json::parse(cmd_cascade(c).at("report.json"));
  for (const auto& row : report["rows"]) EXPECT_NEAR(row["p_n"].get<double>(), 0.0, 1e-12);
}

TEST(Commands, BetaCBracketWithinTolerance) {
  auto c = small_config();
  c.replicas = 5000;
  c.beta_c_lo = 0.2;
  c.beta_c_hi = 2.0;
  c.beta_c_tolerance = 0.1;
  const auto report = nlohmann::json::parse(cmd_beta_c(c).at("report.json"));
  EXPECT_LE(report["width"].get<double>(), 0.1);
}

TEST(Commands, ConcentrationGaussianPasses) {
  auto c = small_config();
  c.betas = {1.0};
  c.replicas = 5000;
  const auto files = cmd_concentration(c);
  EXPECT_TRUE(nlohmann::json::parse(files.at("report.json"))["all_pass"].get<bool>());
  EXPECT_EQ(files.at("concentration.csv").substr(0, 45), "beta,lambda,empirical,std_err,bound,verdict\n1");
}

TEST(Commands, OverlapCsvColumns) {
  auto c = small_config();
  c.betas = {0.0};
  c.overlap_n = 3;
  c.overlap_slabs = 2;
  const auto csv = cmd_overlap(c).at("overlap.csv");
  EXPECT_EQ(csv, "beta,k,i_k,cesaro\n0,1,0.5,0.5\n0,2,0.375,0.4375\n0,3,0.3125,0.39583333333333331\n");
}

TEST(Commands, UnknownCommand) { EXPECT_THROW(run_command("plot", StudyConfig{}), UsageError); }

TEST(Binary, WritesOutputsAndMeta) {
  const auto dir = scratch("bound");
  ASSERT_EQ(run_cli("bound --beta 0 --m-list 1,2 --n-list 4 --replicas 100 --out " + dir.string()), 0);
  for (const char* name : {"report.json", "curves.csv", "tree_rows.csv", "lower_rows.csv", "meta.json"}) {
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  }
  const auto meta = nlohmann::json::parse(read_file(dir / "meta.json"));
  EXPECT_TRUE(meta.contains("wall_seconds"));
  fs::remove_all(dir);
}

TEST(Binary, WorkersDoNotChangeBytes) {
  const auto a = scratch("w1");
  const auto b = scratch("w3");
  const std::string args = "bound --beta 1.5 --m-list 1,2,4 --n-list 4,8 --replicas 400 --seed 5";
  ASSERT_EQ(run_cli(args + " --workers 1 --out " + a.string()), 0);
  ASSERT_EQ(run_cli(args + " --workers 3 --out " + b.string()), 0);
  for (const char* name : {"report.json", "curves.csv", "tree_rows.csv", "lower_rows.csv"}) {
    EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Binary, ConfigFileAndOverrides) {
  const auto dir = scratch("cfg");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "study.cfg");
    cfg << "beta = 0\nm_list = 1,2\nn_list = 4\nreplicas = 100\nseed = 3\n";
  }
  ASSERT_EQ(run_cli("bound --config " + (dir / "study.cfg").string() + " --seed 8 --out " + (dir / "out").string()), 0);
  const auto report = nlohmann::json::parse(read_file(dir / "out" / "report.json"));
  EXPECT_EQ(report["seed"].get<std::uint64_t>(), 8u);
  fs::remove_all(dir);
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch("codes");
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("bound --bogus"), 1);
  EXPECT_EQ(run_cli("bound --set nonsense=1 --out " + dir.string()), 1);
  EXPECT_EQ(run_cli("bound --replicas x --out " + dir.string()), 1);
  EXPECT_EQ(run_cli("bound --config /nonexistent/file.cfg"), 1);
  EXPECT_EQ(run_cli("bound --set env.params=0,-1 --out " + dir.string()), 1);
  EXPECT_EQ(run_cli("cascade --set cascade.depths=30 --out " + dir.string()), 3);
  EXPECT_EQ(run_cli("bound --set d=3 --m-list 400 --n-list 4 --replicas 40 --out " + dir.string()), 3);
  fs::remove_all(dir);
}
