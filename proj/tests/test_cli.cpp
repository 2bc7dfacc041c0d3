#include "h2sls/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

using namespace h2sls;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "h2sls");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("h2sls_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Cli, SpecPrintsDesign) {
  const Result r = call({"spec", "--experiment", "1"});
  EXPECT_EQ(r.code, 0);
  for (const char* piece : {"d=100", "k1=4", "p=50", "k2=5", "sigma_eps=0.4", "sigma_eta=0.4", "sigma_z=1",
                            "row_corr=0", "stage1=lasso", "stage2=lasso"})
    EXPECT_NE(r.out.find(piece), std::string::npos) << piece;
  const Result full = call({"spec", "--experiment", "14", "--full"});
  EXPECT_NE(full.out.find("beta_star = 0.01,0.01"), std::string::npos);
}

TEST(Cli, UnknownExperimentIsConfigError) {
  for (const char* id : {"15", "0", "abc"}) {
    const Result r = call({"spec", "--experiment", id});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("valid ids are 1..14"), std::string::npos);
  }
  const fs::path dir = temp_dir("unknown");
  EXPECT_EQ(call({"run", "--experiment", "99", "--out", (dir / "r.csv").string()}).code, 1);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(call({}).code, 1);
  EXPECT_EQ(call({"run", "--experiment", "1"}).code, 1);  // --out missing
  EXPECT_EQ(call({"bogus"}).code, 1);
  EXPECT_EQ(call({"run", "--out", "x.csv", "--format", "xml"}).code, 1);
}

TEST(Cli, InfeasibleRhoIsConfigError) {
  const fs::path dir = temp_dir("rho");
  const Result r = call({"run", "--experiment", "1", "--n", "47", "--reps", "2", "--rho", "0.3", "--out",
                         (dir / "r.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("NotPD"), std::string::npos);
}

TEST(Cli, RunTwiceGivesIdenticalFiles) {
  const fs::path dir = temp_dir("determinism");
  const std::vector<std::string> base = {"run", "--experiment", "1", "--n", "47", "--reps", "10", "--seed", "7",
                                         "--rho", "0.1"};
  auto with_out = [&](const std::string& name) {
    auto a = base;
    a.push_back("--out");
    a.push_back((dir / name).string());
    return a;
  };
  ASSERT_EQ(call(with_out("a.csv")).code, 0);
  ASSERT_EQ(call(with_out("b.csv")).code, 0);
  EXPECT_EQ(read_text(dir / "a.csv"), read_text(dir / "b.csv"));
  EXPECT_EQ(read_text(dir / "a_aggregate.csv"), read_text(dir / "b_aggregate.csv"));
  auto threaded = with_out("c.csv");
  threaded.push_back("--threads");
  threaded.push_back("3");
  ASSERT_EQ(call(threaded).code, 0);
  EXPECT_EQ(read_text(dir / "a.csv"), read_text(dir / "c.csv"));
}

TEST(Cli, ConfigFileAndEnvironment) {
  const fs::path dir = temp_dir("config");
  write_text(dir / "run.toml", "experiment = \"2\"\nn = 47\nreps = 3\nseed = 5\nformat = \"json\"\n");
  ::setenv("HD2SLS_THREADS", "2", 1);
  const Result r = call({"run", "--config", (dir / "run.toml").string(), "--out", (dir / "r.json").string()});
  ::unsetenv("HD2SLS_THREADS");
  ASSERT_EQ(r.code, 0) << r.err;
  const ExperimentReport rep = read_report_json(dir / "r.json");
  EXPECT_EQ(rep.experiment, "2");
  EXPECT_EQ(rep.replications, 3);
  EXPECT_EQ(rep.master_seed, 5u);
  EXPECT_EQ(rep.parallelism, 2);
}

TEST(Cli, CustomModel) {
  const fs::path dir = temp_dir("custom");
  ModelSpec s = make_sparse_spec(8, 6, 2, 2, 0.5, 0.4, 0.4, 1.0, 0.2, 0.0);
  write_text(dir / "model.txt", to_config_string(s));
  const Result r = call({"run", "--experiment", "custom", "--model", (dir / "model.txt").string(), "--stage1", "ols",
                         "--stage2", "lasso", "--n", "60", "--reps", "2", "--out", (dir / "r.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(read_text(dir / "r.csv").find("\ncustom,1,60,"), std::string::npos);
  EXPECT_EQ(call({"run", "--experiment", "custom", "--out", (dir / "x.csv").string()}).code, 1);
}

TEST(Cli, NumericalErrorExitCode) {
  const fs::path dir = temp_dir("numerical");
  ModelSpec s = make_sparse_spec(3, 4, 4, 3, 1.0, 0.4, 0.4, 1.0, 0.1, 0.0);
  write_text(dir / "model.txt", to_config_string(s));
  const Result r = call({"run", "--experiment", "custom", "--model", (dir / "model.txt").string(), "--stage1",
                         "oracle_ols", "--stage2", "oracle_ols", "--n", "3", "--reps", "1", "--out",
                         (dir / "r.csv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("SingularGram"), std::string::npos);
}

TEST(Cli, SweepTable) {
  const fs::path dir = temp_dir("sweep");
  const Result r = call({"sweep", "--experiments", "1,8", "--n", "47", "--reps", "2", "--aggregate-out",
                         (dir / "agg.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "metric,exp1,exp8");
  EXPECT_EQ(call({"sweep", "--experiments", "1,42"}).code, 1);
}

TEST(Cli, BinaryRuns) {
  const std::string cmd = std::string(H2SLS_CLI_PATH) + " spec --experiment 7 > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  const std::string bad = std::string(H2SLS_CLI_PATH) + " spec --experiment 77 2> /dev/null";
  const int status = std::system(bad.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 1);
}
