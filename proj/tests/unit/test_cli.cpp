#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "fhcac/serialization.hpp"

namespace fhcac {
namespace {

namespace fs = std::filesystem;

const fs::path kData = FHCAC_DATA_DIR;

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string("\"") + FHCAC_CLI_PATH + "\" " + args + " 2>&1";
  Outcome r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

double number_after(const std::string& text, const std::string& key) {
  std::smatch m;
  const std::regex re(key + R"( ([-+0-9.eE]+))");
  if (!std::regex_search(text, m, re)) return std::nan("");
  return std::stod(m[1]);
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("fhcac_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("train").code, 2);
  EXPECT_EQ(run("bogus").code, 2);
}

TEST(Cli, GradcheckOnShippedModel) {
  const auto r = run("oracle gradcheck --model " + q(kData / "models/three_state.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_LT(number_after(r.out, "max_relative_error"), 1e-5) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}

TEST(Cli, EvaluateZeroRewardModel) {
  const auto r = run("oracle evaluate --model " + q(kData / "models/zero_reward.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(number_after(r.out, "J"), 0.0) << r.out;
}

TEST(Cli, FixedpointTabularResidual) {
  const auto r = run("oracle fixedpoint --model " + q(kData / "models/three_state.json") + " --lambda -0.5");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_LT(number_after(r.out, "max_residual"), 1e-10) << r.out;
}

TEST(Cli, SolveReportsFeasibility) {
  const auto r = run("oracle solve --model " + q(kData / "models/three_state.json") + " --grid-points 201");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(number_after(r.out, "feasible"), 1.0) << r.out;
  EXPECT_TRUE(std::isfinite(number_after(r.out, "J\\*")));
}

TEST(Cli, OracleErrorCodes) {
  TempDir dir("oracle_errors");
  EXPECT_EQ(run("oracle evaluate --model " + q(dir.path() / "missing.json")).code, 4);
  std::ofstream(dir.path() / "garbage.json") << "{ not json";
  EXPECT_EQ(run("oracle evaluate --model " + q(dir.path() / "garbage.json")).code, 2);
  auto doc = read_json_file(kData / "models/three_state.json");
  doc["initial_distribution"] = {0.9, 0.9, 0.9};
  write_json_file(dir.path() / "invalid.json", doc);
  EXPECT_EQ(run("oracle evaluate --model " + q(dir.path() / "invalid.json")).code, 3);
}

TEST(Cli, TrainWritesArtifactsAndExitCodes) {
  TempDir dir("train");
  const json cfg{{"model", {{"kind", "cmdp"}, {"path", (kData / "models/three_state.json").string()}}},
                 {"run", {{"num_episodes", 0}, {"seeds", {1, 2}}}}};
  write_json_file(dir.path() / "cfg.json", cfg);
  const auto r = run("train --config " + q(dir.path() / "cfg.json") + " --out " + q(dir.path() / "out"));
  EXPECT_EQ(r.code, 0) << r.out;
  int csvs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "out"))
    if (e.path().filename() == "metrics.csv") {
      ++csvs;
      std::ifstream in(e.path());
      std::string header, extra;
      std::getline(in, header);
      EXPECT_EQ(header, "episode,return,cost_1,lambda_1,ma_return,ma_cost_1");
      EXPECT_FALSE(std::getline(in, extra));
    }
  EXPECT_EQ(csvs, 2);

  auto bad = cfg;
  bad["run"]["seeds"] = json::array();
  write_json_file(dir.path() / "bad.json", bad);
  EXPECT_EQ(run("train --config " + q(dir.path() / "bad.json")).code, 3);
  std::ofstream(dir.path() / "broken.json") << "[1, 2";
  EXPECT_EQ(run("train --config " + q(dir.path() / "broken.json")).code, 2);
  EXPECT_EQ(run("train --config " + q(dir.path() / "absent.json")).code, 4);
}

TEST(Cli, EnvGenerateIsDeterministic) {
  TempDir dir("env");
  const auto t = kData / "grid/acceptance_template.json";
  ASSERT_EQ(run("env generate --template " + q(t) + " --seed 8 --out " + q(dir.path() / "a.json")).code, 0);
  ASSERT_EQ(run("env generate --template " + q(t) + " --seed 8 --out " + q(dir.path() / "b.json")).code, 0);
  EXPECT_EQ(read_json_file(dir.path() / "a.json"), read_json_file(dir.path() / "b.json"));
  const auto r = run("env generate --template " + q(t) + " --seed 8 --alpha-fraction 0.6 --out " +
                     q(dir.path() / "c.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const double s = number_after(r.out, "S");
  EXPECT_NEAR(read_json_file(dir.path() / "c.json").at("threshold").get<double>(), 0.6 * s, 1e-9 * s);
}

TEST(Cli, PlotCommand) {
  TempDir dir("plot");
  std::ofstream(dir.path() / "a.csv") << "episode,return,cost_1,lambda_1,ma_return,ma_cost_1\n0,1,2,0,1,2\n1,3,1,0,2,1.5\n";
  std::ofstream(dir.path() / "b.csv") << "episode,return,ma_return\n0,1,1\n";
  auto r = run("plot --csv " + q(dir.path() / "a.csv") + " --out " + q(dir.path() / "p.svg"));
  EXPECT_EQ(r.code, 0) << r.out;
  std::ifstream in(dir.path() / "p.svg");
  std::stringstream svg;
  svg << in.rdbuf();
  EXPECT_NE(svg.str().find("stroke-dasharray"), std::string::npos);
  r = run("plot --csv " + q(dir.path() / "a.csv") + " " + q(dir.path() / "b.csv") + " --out " +
          q(dir.path() / "q.svg"));
  EXPECT_EQ(r.code, 2) << r.out;
}

}  // namespace
}  // namespace fhcac
