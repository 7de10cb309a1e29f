#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fcco::cli;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fcco_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const std::string& name, const json& j) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(1);
    return p.string();
  }

  Options opts(const std::string& config, const std::string& out) {
    Options o;
    o.config_path = config;
    o.out = (dir_ / out).string();
    o.quiet = true;
    return o;
  }

  fs::path dir_;
};

json sonx_config(int T) {
  return {{"solver", "sonx"},
          {"seed", 3},
          {"problem", {{"synthetic", "quadratic-fcco"}, {"n", 10}, {"d", 4}, {"d1", 2}, {"samples", 20}, {"sigma", 0.1}}},
          {"params", {{"B1", 4}, {"B2", 4}, {"eta", 0.05}, {"tau", 0.5}, {"T", T}}},
          {"trace", {{"every", 1}}}};
}

json compare_config() {
  return {{"task", "tracking"},
          {"seeds", 2},
          {"gammas", {0, "theoretical", 0.5}},
          {"problem", {{"synthetic", "linear-cvar-fcco"}, {"n", 10}, {"d", 3}, {"samples", 50}, {"sigma", 0.1}}},
          {"tracking", {{"tau", 0.2}, {"B1", 3}, {"B2", 4}, {"T", 100}, {"drift", 0.01}, {"burn_in", 20}}}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  return rows - 1;
}

}  // namespace

TEST_F(CliTest, RunWritesOneTraceRowPerIteration) {
  const std::string cfg = write_config("run.json", sonx_config(10));
  ASSERT_EQ(cmd_run(opts(cfg, "out")), kOk);
  EXPECT_EQ(data_rows(dir_ / "out" / "trace.csv"), 10u);
  const json summary = json::parse(slurp(dir_ / "out" / "summary.json"));
  EXPECT_EQ(summary["status"], "completed");
  EXPECT_EQ(summary["iterations"], 10);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "checkpoint.json"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "run_meta.json"));
}

TEST_F(CliTest, SameSeedGivesIdenticalTrace) {
  const std::string cfg = write_config("run.json", sonx_config(50));
  ASSERT_EQ(cmd_run(opts(cfg, "a")), kOk);
  ASSERT_EQ(cmd_run(opts(cfg, "b")), kOk);
  EXPECT_EQ(slurp(dir_ / "a" / "trace.csv"), slurp(dir_ / "b" / "trace.csv"));
  Options other = opts(cfg, "c");
  other.seed = 4;
  ASSERT_EQ(cmd_run(other), kOk);
  EXPECT_NE(slurp(dir_ / "a" / "trace.csv"), slurp(dir_ / "c" / "trace.csv"));
}

TEST_F(CliTest, InvalidConfigCreatesNoOutput) {
  json bad = sonx_config(10);
  bad["bogus"] = 1;
  EXPECT_EQ(cmd_run(opts(write_config("bad.json", bad), "bad_out")), kInvalidConfig);
  EXPECT_FALSE(fs::exists(dir_ / "bad_out"));
  json tau = sonx_config(10);
  tau["params"]["tau"] = 1.5;
  EXPECT_EQ(cmd_run(opts(write_config("tau.json", tau), "tau_out")), kInvalidConfig);
  EXPECT_FALSE(fs::exists(dir_ / "tau_out"));
  EXPECT_EQ(cmd_run(opts((dir_ / "none.json").string(), "x")), kInvalidConfig);
  const fs::path garbled = dir_ / "garbled.json";
  std::ofstream(garbled) << "{\"solver\":";
  EXPECT_EQ(cmd_run(opts(garbled.string(), "g")), kInvalidConfig);
}

TEST_F(CliTest, MissingDatasetIsDataError) {
  const json cfg = {{"solver", "sonx"}, {"problem", {{"dataset", (dir_ / "nope.csv").string()}, {"format", "grouped"}}}};
  EXPECT_EQ(cmd_run(opts(write_config("miss.json", cfg), "m")), kDataError);
}

TEST_F(CliTest, DivergenceExitsWithAbortSummary) {
  json cfg = sonx_config(100);
  cfg["params"] = {{"eta", 1e9}, {"T", 100}, {"tau", 1}};
  ASSERT_EQ(cmd_run(opts(write_config("div.json", cfg), "div")), kDiverged);
  const json summary = json::parse(slurp(dir_ / "div" / "summary.json"));
  EXPECT_EQ(summary["status"], "aborted");
  EXPECT_FALSE(summary["abort"].is_null());
}

TEST_F(CliTest, CompareIsIndependentOfJobCount) {
  const std::string cfg = write_config("cmp.json", compare_config());
  Options one = opts(cfg, "one");
  Options three = opts(cfg, "three");
  three.jobs = 3;
  ASSERT_EQ(cmd_compare(one), kOk);
  ASSERT_EQ(cmd_compare(three), kOk);
  const std::string csv = slurp(dir_ / "one" / "compare.csv");
  EXPECT_EQ(csv, slurp(dir_ / "three" / "compare.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,gamma=0,gamma=theoretical,gamma=0.5");
}

TEST_F(CliTest, CompareGammaList) {
  json single = compare_config();
  single["gammas"] = {0.25};
  ASSERT_EQ(cmd_compare(opts(write_config("single.json", single), "single")), kOk);
  const std::string csv = slurp(dir_ / "single" / "compare.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,gamma=0.25");
  json empty = compare_config();
  empty["gammas"] = json::array();
  EXPECT_EQ(cmd_compare(opts(write_config("empty.json", empty), "empty")), kInvalidConfig);
}

TEST_F(CliTest, DiagnoseCheckpoint) {
  const std::string run_cfg = write_config("run.json", sonx_config(20));
  ASSERT_EQ(cmd_run(opts(run_cfg, "run")), kOk);
  const json problem = sonx_config(20)["problem"];
  const json ok = {{"problem", problem},
                   {"checkpoint", (dir_ / "run" / "checkpoint.json").string()},
                   {"probe", {{"trials", 500}, {"radius", 2}}},
                   {"moreau", {{"max_grad", 10.0}}}};
  EXPECT_EQ(cmd_diagnose(opts(write_config("ok.json", ok), "diag")), kOk);
  EXPECT_TRUE(fs::exists(dir_ / "diag" / "diagnose.json"));

  json missing = ok;
  missing["checkpoint"] = (dir_ / "absent.json").string();
  EXPECT_EQ(cmd_diagnose(opts(write_config("missing.json", missing), "d2")), kDataError);

  json small_rho = ok;
  small_rho["suite"] = {"probe"};
  small_rho["probe"] = {{"trials", 2000}, {"radius", 5}, {"rho", 0.0}};
  EXPECT_EQ(cmd_diagnose(opts(write_config("rho.json", small_rho), "d3")), kDiagnosticFailed);
}

TEST(CliEntry, ArgumentErrors) {
  const char* bad[] = {"fcco", "launch", "x.json"};
  EXPECT_EQ(main_entry(3, const_cast<char**>(bad)), kInvalidConfig);
  const char* help[] = {"fcco", "--help"};
  EXPECT_EQ(main_entry(2, const_cast<char**>(help)), kOk);
  EXPECT_FALSE(build_describe().empty());
}
