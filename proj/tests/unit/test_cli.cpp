#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fvi/errors.hpp"
#include "fvi_cli/commands.hpp"
#include "fvi_cli/config.hpp"

using namespace fvi;
using namespace fvi::cli;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  const auto d = fs::temp_directory_path() / "fvi_cli_test";
  fs::create_directories(d);
  return d;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto p = work_dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the fvi executable and returns its exit status.
int run_fvi(const std::string& args) {
  const std::string cmd = std::string(FVI_EXE) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json bound_config() {
  return parse_config_text(R"(
command = bound
[model]
name = conjugate_gaussian
x = [0.0, 0.5]
[family]
name = diag_gaussian
theta = [0.1, -0.5]
[divergence]
name = chi_n
params = {n = 2}
direction = forward
[estimator]
K = 2000
seed = 4
)");
}

}  // namespace

TEST(ConfigText, SectionsArraysAndInlineTables) {
  const json c = parse_config_text(R"(
# comment
command = train
top.level = 3
[model]
name = synthetic_sin   # trailing comment
x = [1, 2.5, -3e-1]
flag = true
label = "a # not a comment"
[divergence]
params = {n = 2, scale = 0.5}
)");
  EXPECT_EQ(c["command"], "train");
  EXPECT_EQ(c["top"]["level"], 3);
  EXPECT_EQ(c["model"]["name"], "synthetic_sin");
  EXPECT_EQ(c["model"]["x"], json::array({1, 2.5, -0.3}));
  EXPECT_EQ(c["model"]["flag"], true);
  EXPECT_EQ(c["model"]["label"], "a # not a comment");
  EXPECT_EQ(c["divergence"]["params"]["n"], 2);
  EXPECT_EQ(c["divergence"]["params"]["scale"], 0.5);
}

TEST(ConfigText, ErrorsCarryLineNumbers) {
  try {
    parse_config_text("a = 1\nb = [1, 2\n", "f.conf");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("f.conf:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config_text("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[s\n"), ConfigError);
  EXPECT_THROW(parse_config_text("just words\n"), ConfigError);
  EXPECT_THROW(parse_config_text("s = \"open\n"), ConfigError);
  EXPECT_THROW(parse_config_text("a = 1\na.b = 2\n"), ConfigError);
}

TEST(ConfigText, ShorthandExpands) {
  json c = parse_config_text(R"(
divergence = "chi_n"
divergence_params = { n = 2.0 }
model = "conjugate_gaussian"
family = diag_gaussian
)");
  expand_shorthand(c);
  EXPECT_EQ(c["divergence"]["name"], "chi_n");
  EXPECT_EQ(c["divergence"]["params"]["n"], 2.0);
  EXPECT_FALSE(c.contains("divergence_params"));
  EXPECT_EQ(c["model"]["name"], "conjugate_gaussian");
  EXPECT_EQ(c["family"]["name"], "diag_gaussian");
  json twice = parse_config_text("divergence_params = {n = 2}\n[divergence]\nname = chi_n\nparams = {n = 3}\n");
  EXPECT_THROW(expand_shorthand(twice), ConfigError);
}

TEST(ConfigText, OverridesAndValues) {
  json c = bound_config();
  apply_override(c, "estimator.K=10");
  apply_override(c, "divergence.params.n=3");
  EXPECT_EQ(c["estimator"]["K"], 10);
  EXPECT_EQ(c["divergence"]["params"]["n"], 3);
  EXPECT_EQ(parse_value("[1, 2]"), json::array({1, 2}));
  EXPECT_EQ(parse_value("word"), "word");
  EXPECT_THROW(apply_override(c, "no_equals"), ConfigError);
}

TEST(LoadConfig, JsonAndRunRecord) {
  const json rec = run_command(bound_config());
  const auto path = write_file("record.json", rec.dump(2));
  const json c = load_config(path);
  EXPECT_EQ(c, rec["config"]);
  const auto text = write_file("cfg.conf", "command = bound\nmodel = conjugate_gaussian\n");
  EXPECT_EQ(load_config(text)["model"]["name"], "conjugate_gaussian");
  EXPECT_THROW(load_config((work_dir() / "missing.conf").string()), ConfigError);
  EXPECT_THROW(load_config(write_file("bad.json", "{ not json")), ConfigError);
}

TEST(Commands, BoundRecordShape) {
  const json rec = run_command(bound_config());
  for (const char* k : {"config", "version", "results", "timing", "diagnostics"}) EXPECT_TRUE(rec.contains(k)) << k;
  const auto& b = rec["results"]["bound"];
  EXPECT_EQ(b["K"], 2000);
  EXPECT_EQ(b["divergence"], "chi_n");
  EXPECT_EQ(b["direction"], "forward");
  // The raw chi^2 bound is an upper bound on p(D)^2 - 1.
  const double oracle = rec["results"]["oracle"]["log_evidence"];
  EXPECT_GE(b["value"].get<double>() + 3.0 * b["stderr"].get<double>(), std::exp(2.0 * oracle) - 1.0);
  // Defaults are echoed back.
  EXPECT_TRUE(rec["config"]["model"].contains("prior_var"));
  EXPECT_EQ(record_exit_code(rec), kExitOk);
}

TEST(Commands, UnknownKeysAreRejected) {
  json c = bound_config();
  c["model"]["prior_variance"] = 2.0;
  EXPECT_THROW(run_command(c), ConfigError);
  c = bound_config();
  c["command"] = "nope";
  EXPECT_THROW(run_command(c), ConfigError);
}

TEST(Commands, ReplayIsBitwise) {
  const json a = run_command(bound_config());
  const json b = run_command(a["config"]);
  EXPECT_EQ(a["results"], b["results"]);
  EXPECT_EQ(a["config"], b["config"]);
}

TEST(Commands, SeedDefaultsFromEnvironment) {
  json c = bound_config();
  c["estimator"].erase("seed");
  ::setenv("FVI_SEED", "17", 1);
  EXPECT_EQ(default_seed(), 17u);
  const json a = run_command(c);
  EXPECT_EQ(a["config"]["estimator"]["seed"], 17);
  ::unsetenv("FVI_SEED");
  EXPECT_EQ(default_seed(), 1u);
}

TEST(Commands, SandwichSweepBracketsOracle) {
  json c = parse_config_text(R"(
command = sandwich
[model]
name = synthetic_sin
[family]
name = uniform_width
theta = [1.1]
[upper]
name = chi_n
params = {n = 2}
direction = forward
[lower]
name = kl
[estimator]
K = 20000
L = 8
seed = 2
[sweep]
x = [0.0, 0.5, 1.0]
)");
  const json rec = run_command(c);
  const auto& pts = rec["results"]["points"];
  ASSERT_EQ(pts.size(), 3u);
  for (const auto& p : pts) {
    EXPECT_TRUE(p["ordered"].get<bool>());
    EXPECT_TRUE(p["contains_oracle"].get<bool>()) << p.dump();
  }
}

TEST(Commands, MeanfieldReproducesCavi) {
  json c = parse_config_text("command = meanfield\n[model]\nmu = [0.5, -0.2]\n");
  const json rec = run_command(c);
  const auto& f = rec["results"]["factors"];
  EXPECT_NEAR(f[0]["mean"].get<double>(), 0.5, 1e-6);
  EXPECT_NEAR(f[1]["var"].get<double>(), 0.5, 1e-6);
  EXPECT_TRUE(rec["results"]["converged"].get<bool>());
}

TEST(Commands, DatasetSplit) {
  std::string csv = "a,y\n";
  for (int i = 0; i < 20; ++i) csv += std::to_string(i) + "," + std::to_string(3 * i) + "\n";
  json c;
  c["command"] = "dataset";
  c["dataset"] = {{"csv", write_file("d.csv", csv)},
                  {"target", "y"},
                  {"split", 0.75},
                  {"normalize", true},
                  {"seed", 2},
                  {"train_out", (work_dir() / "d_train.csv").string()},
                  {"test_out", (work_dir() / "d_test.csv").string()}};
  run_command(c);
  const auto train = read_file((work_dir() / "d_train.csv").string());
  const auto test = read_file((work_dir() / "d_test.csv").string());
  EXPECT_EQ(std::count(train.begin(), train.end(), '\n'), 16);
  EXPECT_EQ(std::count(test.begin(), test.end(), '\n'), 6);
}

TEST(Commands, CheckQuickPasses) {
  json c;
  c["command"] = "check";
  const json rec = run_command(c);
  EXPECT_EQ(rec["results"]["failed"], 0);
  EXPECT_GT(rec["results"]["passed"].get<int>(), 10);
  EXPECT_EQ(record_exit_code(rec), kExitOk);
}

TEST(Executable, ExitCodes) {
  EXPECT_EQ(run_fvi("--version"), kExitOk);
  EXPECT_EQ(run_fvi("bound --model conjugate_gaussian --x 0 --family diag_gaussian --theta 0 0 --divergence kl --K 100"),
            kExitOk);
  EXPECT_EQ(run_fvi("bound --model conjugate_gaussian"), kExitUsage);  // missing divergence
  EXPECT_EQ(run_fvi("bound --bogus"), kExitUsage);
  EXPECT_EQ(run_fvi("sandwich --model conjugate_gaussian --x 0 --upper kl --lower kl"), kExitUsage);
  EXPECT_EQ(run_fvi("meanfield --divergence total_variation"), kExitUsage);
  // Every draw leaves the generator domain: numeric failure.
  EXPECT_EQ(run_fvi("bound --model conjugate_gaussian --set model.prior_var=0.01 --set model.lik_var=0.01 --x 0 "
                    "--family diag_gaussian --theta 0 -2.649 --divergence custom_c2 --K 100"),
            kExitNumeric);
}

TEST(Executable, RecordReplaysBitwise) {
  const auto out1 = (work_dir() / "r1.json").string();
  const auto out2 = (work_dir() / "r2.json").string();
  ASSERT_EQ(run_fvi("train --model conjugate_gaussian --x 0.3 1.1 --family diag_gaussian --theta 0 0 "
                    "--divergence kl --K 50 --epochs 20 --lr 0.05 --seed 9 -o " + out1),
            kExitOk);
  ASSERT_EQ(run_fvi("train --config " + out1 + " -o " + out2), kExitOk);
  json a = json::parse(read_file(out1)), b = json::parse(read_file(out2));
  EXPECT_EQ(a["results"], b["results"]);
  EXPECT_EQ(a["config"], b["config"]);
}

TEST(Executable, ShippedConfigsParse) {
  EXPECT_EQ(load_config(std::string(FVI_CONFIG_DIR) + "/sin_sweep.conf")["sweep"]["x_range"], json::array({-0.5, 1.5, 20}));
  for (const char* name : {"sin_train_elbo.conf", "sin_train_cubo.conf"}) {
    const json c = load_config(std::string(FVI_CONFIG_DIR) + "/" + name);
    EXPECT_EQ(c["command"], "train");
    EXPECT_EQ(c["model"]["n_train"], 500);
    EXPECT_EQ(c["family"]["theta"], json::array({1.5}));
  }
}
