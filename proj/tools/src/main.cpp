#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "fvi/errors.hpp"
#include "fvi/version.hpp"
#include "fvi_cli/commands.hpp"

using namespace fvi;
using namespace fvi::cli;

namespace {

// Flag values collected per subcommand and applied on top of the config file.
struct Overrides {
  std::vector<std::pair<std::string, json>> values;
  std::vector<std::string> assignments;
  std::string config_path;
  std::string out_path;

  void put(std::string path, json v) { values.emplace_back(std::move(path), std::move(v)); }
};

template <class T>
void flag(CLI::App* app, Overrides& ov, const std::string& name, const std::string& path,
          const std::string& help) {
  app->add_option_function<T>(name, [&ov, path](const T& v) { ov.put(path, json(v)); }, help);
}

// "k=v" pairs into a parameter table.
void param_flag(CLI::App* app, Overrides& ov, const std::string& name, const std::string& path) {
  app->add_option_function<std::vector<std::string>>(
      name,
      [&ov, path, name](const std::vector<std::string>& items) {
        for (const auto& it : items) {
          const auto eq = it.find('=');
          if (eq == std::string::npos) throw CLI::ValidationError(name, "expected key=value, got '" + it + "'");
          ov.put(path + "." + it.substr(0, eq), parse_value(it.substr(eq + 1)));
        }
      },
      "divergence parameter key=value (repeatable)");
}

void common(CLI::App* app, Overrides& ov) {
  app->add_option("--config", ov.config_path, "config file (key = value with [sections], or a JSON RunRecord)");
  app->add_option("--set", ov.assignments, "override section.key=value (repeatable)");
  app->add_option("-o,--out", ov.out_path, "write the JSON RunRecord here instead of stdout");
}

void model_flags(CLI::App* app, Overrides& ov) {
  flag<std::string>(app, ov, "--model", "model.name", "synthetic_sin|conjugate_gaussian|correlated_gaussian|bnn_regression");
  flag<std::vector<double>>(app, ov, "--x", "model.x", "observations");
  flag<std::string>(app, ov, "--data", "model.data", "CSV file for bnn_regression");
  flag<std::string>(app, ov, "--target", "model.target", "target column for bnn_regression");
  flag<std::string>(app, ov, "--family", "family.name", "uniform_width|diag_gaussian");
  flag<std::vector<double>>(app, ov, "--theta", "family.theta", "variational parameters");
}

void estimator_flags(CLI::App* app, Overrides& ov, const std::string& sec) {
  flag<std::size_t>(app, ov, "--K", sec + ".K", "outer Monte Carlo samples");
  flag<std::size_t>(app, ov, "--L", sec + ".L", "importance samples per outer sample");
  flag<std::uint64_t>(app, ov, "--seed", sec + ".seed", "RNG seed (default $FVI_SEED or 1)");
  flag<unsigned>(app, ov, "--threads", sec + ".threads", "worker threads");
}

json resolve(const std::string& command, const Overrides& ov) {
  json cfg = ov.config_path.empty() ? json::object() : load_config(ov.config_path);
  for (const auto& a : ov.assignments) apply_override(cfg, a);
  for (const auto& [path, v] : ov.values) set_path(cfg, path, v);
  if (cfg.contains("command") && cfg["command"] != command)
    throw ConfigError("config is for command '" + cfg["command"].get<std::string>() + "', not '" + command + "'");
  cfg["command"] = command;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"f-divergence variational inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion) + " (" + kGitDescribe + ")");
  std::map<std::string, Overrides> ov;

  auto* bound = app.add_subcommand("bound", "Monte Carlo f-variational bound");
  common(bound, ov["bound"]);
  model_flags(bound, ov["bound"]);
  flag<std::string>(bound, ov["bound"], "--divergence", "divergence.name", "registry name");
  param_flag(bound, ov["bound"], "--param", "divergence.params");
  flag<std::string>(bound, ov["bound"], "--direction", "divergence.direction", "reverse|forward");
  estimator_flags(bound, ov["bound"], "estimator");
  flag<std::string>(bound, ov["bound"], "--samples-csv", "output.samples_csv", "per-sample log ratios");

  auto* sw = app.add_subcommand("sandwich", "two-sided evidence bounds, optionally over an x sweep");
  common(sw, ov["sandwich"]);
  model_flags(sw, ov["sandwich"]);
  flag<std::string>(sw, ov["sandwich"], "--upper", "upper.name", "generator for the upper bound");
  param_flag(sw, ov["sandwich"], "--upper-param", "upper.params");
  flag<std::string>(sw, ov["sandwich"], "--upper-direction", "upper.direction", "reverse|forward");
  flag<std::string>(sw, ov["sandwich"], "--lower", "lower.name", "generator for the lower bound");
  param_flag(sw, ov["sandwich"], "--lower-param", "lower.params");
  flag<std::string>(sw, ov["sandwich"], "--lower-direction", "lower.direction", "reverse|forward");
  estimator_flags(sw, ov["sandwich"], "estimator");
  flag<std::vector<double>>(sw, ov["sandwich"], "--sweep-x", "sweep.x", "single-observation x values");
  flag<std::vector<double>>(sw, ov["sandwich"], "--sweep-range", "sweep.x_range", "lo hi n");
  flag<std::string>(sw, ov["sandwich"], "--csv", "output.csv", "curve CSV (x, lower, upper, oracle)");

  auto* tr = app.add_subcommand("train", "stochastic f-VI training");
  common(tr, ov["train"]);
  model_flags(tr, ov["train"]);
  flag<std::string>(tr, ov["train"], "--divergence", "divergence.name", "registry name");
  param_flag(tr, ov["train"], "--param", "divergence.params");
  flag<std::string>(tr, ov["train"], "--direction", "divergence.direction", "reverse|forward");
  estimator_flags(tr, ov["train"], "train");
  flag<std::string>(tr, ov["train"], "--gradient", "train.gradient", "score|reparam|iw_reparam");
  flag<std::string>(tr, ov["train"], "--objective", "train.objective", "raw|log");
  flag<std::string>(tr, ov["train"], "--optimizer", "train.optimizer", "adam|sgd");
  flag<double>(tr, ov["train"], "--lr", "train.lr", "learning rate");
  flag<std::size_t>(tr, ov["train"], "--epochs", "train.epochs", "epoch budget");
  flag<std::size_t>(tr, ov["train"], "--batch", "train.batch_size", "minibatch size (0 = full)");
  flag<double>(tr, ov["train"], "--tol", "train.tol", "relative tolerance on the smoothed objective");
  flag<std::size_t>(tr, ov["train"], "--patience", "train.patience", "evaluations below tol (0 = never stop early)");
  flag<std::string>(tr, ov["train"], "--trace", "output.trace", "JSON-lines trace file");

  auto* mf = app.add_subcommand("meanfield", "coordinate-ascent mean-field f-VI");
  common(mf, ov["meanfield"]);
  flag<std::string>(mf, ov["meanfield"], "--target", "model.name", "model (default correlated_gaussian)");
  flag<std::vector<double>>(mf, ov["meanfield"], "--mu", "model.mu", "target mean");
  flag<std::string>(mf, ov["meanfield"], "--divergence", "divergence.name", "registry name (default kl)");
  param_flag(mf, ov["meanfield"], "--param", "divergence.params");
  flag<std::size_t>(mf, ov["meanfield"], "--grid", "meanfield.grid_points", "grid points per factor");
  flag<double>(mf, ov["meanfield"], "--tol", "meanfield.tol", "bound change that ends the sweeps");
  flag<std::size_t>(mf, ov["meanfield"], "--max-sweeps", "meanfield.max_sweeps", "sweep budget");
  flag<bool>(mf, ov["meanfield"], "--analytic", "meanfield.analytic", "closed-form CAVI where available");
  flag<std::string>(mf, ov["meanfield"], "--csv-dir", "output.csv_dir", "directory for factor_<j>.csv");

  auto* ck = app.add_subcommand("check", "run the invariant suite");
  common(ck, ov["check"]);
  flag<std::string>(ck, ov["check"], "--level", "check.level", "quick|full");

  auto* ds = app.add_subcommand("dataset", "split and normalize a CSV dataset");
  common(ds, ov["dataset"]);
  flag<std::string>(ds, ov["dataset"], "--csv", "dataset.csv", "input CSV with header");
  flag<std::string>(ds, ov["dataset"], "--target", "dataset.target", "target column");
  flag<double>(ds, ov["dataset"], "--split", "dataset.split", "training fraction");
  flag<bool>(ds, ov["dataset"], "--normalize", "dataset.normalize", "standardize with training statistics");
  flag<std::uint64_t>(ds, ov["dataset"], "--seed", "dataset.seed", "shuffle seed");
  flag<std::string>(ds, ov["dataset"], "--train-out", "dataset.train_out", "training CSV path");
  flag<std::string>(ds, ov["dataset"], "--test-out", "dataset.test_out", "test CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "fvi: " << e.what() << "\n";
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const Overrides& o = ov[command];
  try {
    const json record = run_command(resolve(command, o));
    const std::string text = record.dump(2) + "\n";
    if (o.out_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(o.out_path);
      if (!f) throw ConfigError("cannot write '" + o.out_path + "'");
      f << text;
    }
    return record_exit_code(record);
  } catch (const ConfigError& e) {
    std::cerr << "fvi: configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CapabilityError& e) {
    std::cerr << "fvi: unsupported: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "fvi: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::cerr << "fvi: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const InvariantError& e) {
    std::cerr << "fvi: invariant failure: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "fvi: " << e.what() << "\n";
    return kExitNumeric;
  }
}
