#include "fvi_cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>

#include "fvi/errors.hpp"
#include "fvi/estimators.hpp"
#include "fvi/meanfield.hpp"
#include "fvi/optimizer.hpp"
#include "fvi/oracle.hpp"
#include "fvi/version.hpp"
#include "fvi_cli/check_suite.hpp"

namespace fvi::cli {

namespace {

json& section(json& cfg, const char* name) {
  json& s = cfg[name];
  if (s.is_null()) s = json::object();
  if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be a table");
  return s;
}

void check_known(const json& sec, const std::string& where, std::initializer_list<const char*> keys) {
  for (auto it = sec.begin(); it != sec.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in [" + where + "]");
  }
}

template <class T>
T get(json& sec, const char* key, T def) {
  if (!sec.contains(key) || sec[key].is_null()) sec[key] = def;
  try {
    return sec[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

template <class T>
T require(const json& sec, const char* key, const std::string& where) {
  if (!sec.contains(key) || sec[key].is_null())
    throw ConfigError("missing required key '" + where + "." + key + "'");
  try {
    return sec[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
  }
}

std::size_t get_count(json& sec, const char* key, std::size_t def) {
  if (!sec.contains(key) || sec[key].is_null()) sec[key] = def;
  const json& v = sec[key];
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::size_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1e18) {
      sec[key] = static_cast<std::size_t>(d);
      return static_cast<std::size_t>(d);
    }
  }
  throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
}

std::uint64_t get_seed(json& sec, const char* key = "seed") {
  if (!sec.contains(key) || sec[key].is_null()) sec[key] = default_seed();
  const json& v = sec[key];
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
}

std::vector<double> get_vec(json& sec, const char* key, std::vector<double> def) {
  return get<std::vector<double>>(sec, key, std::move(def));
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

json make_record(const json& config, json results, double seconds, json diagnostics) {
  json r;
  r["config"] = config;
  r["version"] = {{"fvi", kVersion}, {"git", kGitDescribe}};
  r["results"] = std::move(results);
  r["timing"] = {{"wall_seconds", seconds}};
  r["diagnostics"] = std::move(diagnostics);
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

json bound_json(const BoundEstimate& b) {
  json j;
  j["value"] = b.value;
  j["stderr"] = b.stderr_;
  j["K"] = b.K;
  j["L"] = b.L;
  j["kind"] = to_string(b.kind);
  j["divergence"] = b.divergence;
  j["direction"] = to_string(b.direction);
  j["degenerate"] = b.degenerate;
  j["degenerate_reason"] = b.degenerate_reason;
  j["zero_ratio"] = b.zero_ratio;
  j["outside_domain"] = b.outside_domain;
  j["log_ratio_min"] = b.log_ratio_min;
  j["log_ratio_max"] = b.log_ratio_max;
  j["log_evidence"] = b.log_evidence ? json(*b.log_evidence) : json(nullptr);
  j["log_evidence_stderr"] = b.log_evidence_stderr ? json(*b.log_evidence_stderr) : json(nullptr);
  j["log_evidence_biased"] = b.log_evidence_biased;
  return j;
}

json side_json(const SandwichSide& s) {
  json j;
  j["divergence"] = s.divergence;
  j["direction"] = to_string(s.direction);
  j["bound"] = bound_json(s.bound);
  j["evidence"] = s.evidence;
  j["log_evidence"] = s.log_evidence;
  j["log_evidence_stderr"] = s.log_evidence_stderr;
  j["valid"] = s.valid;
  j["reason"] = s.reason;
  j["monotone_on_samples"] = s.monotone_on_samples;
  return j;
}

// Exact log evidence when the model allows it cheaply.
std::optional<double> oracle_log_evidence(const LatentModel& m) {
  if (const auto* c = dynamic_cast<const ConjugateGaussianModel*>(&m)) return c->log_evidence();
  if (dynamic_cast<const CorrelatedGaussianTarget*>(&m)) return 0.0;
  if (dynamic_cast<const SyntheticSinModel*>(&m)) return evidence_quadrature(m).log_value;
  return std::nullopt;
}

EstimatorOptions estimator_options(json& est) {
  EstimatorOptions o;
  o.threads = static_cast<unsigned>(get_count(est, "threads", 1));
  if (o.threads == 0) throw ConfigError("estimator.threads must be >= 1");
  return o;
}

std::vector<double> sweep_points(json& sweep) {
  check_known(sweep, "sweep", {"x", "x_range"});
  if (sweep.contains("x")) return get_vec(sweep, "x", {});
  const auto r = require<std::vector<double>>(sweep, "x_range", "sweep");
  if (r.size() != 3 || r[2] < 1 || r[2] != std::floor(r[2]))
    throw ConfigError("sweep.x_range must be [lo, hi, n] with integer n >= 1");
  const auto n = static_cast<std::size_t>(r[2]);
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = n == 1 ? r[0] : r[0] + (r[1] - r[0]) * static_cast<double>(i) / static_cast<double>(n - 1);
  return xs;
}

// Posterior-predictive RMSE of a diagonal-Gaussian BNN in target units.
double bnn_rmse(const BnnRegressionModel& m, const Dataset& d, const VariationalFamily& fam,
                const Vector& theta, std::size_t samples, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0x726d7365);
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(d.size()));
  for (std::size_t s = 0; s < samples; ++s) mean += m.predict_all(fam.sample(theta, rng), d.features);
  mean /= static_cast<double>(samples);
  Vector y = *d.targets;
  if (d.normalization) {
    const double sd = d.normalization->sd[d.normalization->sd.size() - 1];
    const double mu = d.normalization->mean[d.normalization->mean.size() - 1];
    mean = (mean.array() * sd + mu).matrix();
    y = (y.array() * sd + mu).matrix();
  }
  return std::sqrt((mean - y).squaredNorm() / static_cast<double>(d.size()));
}

}  // namespace

std::uint64_t default_seed() {
  if (const char* s = std::getenv("FVI_SEED")) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(s, &pos);
      if (pos == std::string(s).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("FVI_SEED must be a non-negative integer, got '") + s + "'");
  }
  return 1;
}

ModelBundle build_model(json& spec) {
  const auto name = require<std::string>(spec, "name", "model");
  ModelBundle b;
  if (name == "synthetic_sin") {
    check_known(spec, "model", {"name", "x", "test_x", "n_train", "n_test", "data_seed"});
    if (spec.contains("x")) {
      b.model = synthetic_sin_model(get_vec(spec, "x", {}));
      if (spec.contains("test_x")) b.test = synthetic_sin_model(get_vec(spec, "test_x", {}));
    } else {
      const auto n_train = get_count(spec, "n_train", 500);
      const auto n_test = get_count(spec, "n_test", 0);
      const auto all = generate_sin_data(n_train + n_test, get_seed(spec, "data_seed"));
      b.model = synthetic_sin_model({all.begin(), all.begin() + static_cast<long>(n_train)});
      if (n_test > 0) b.test = synthetic_sin_model({all.begin() + static_cast<long>(n_train), all.end()});
    }
  } else if (name == "conjugate_gaussian") {
    check_known(spec, "model", {"name", "prior_mean", "prior_var", "lik_var", "x", "test_x"});
    const double m0 = get(spec, "prior_mean", 0.0);
    const double v0 = get(spec, "prior_var", 1.0);
    const double s2 = get(spec, "lik_var", 1.0);
    b.model = conjugate_gaussian_model(m0, v0, s2, get_vec(spec, "x", {}));
    if (spec.contains("test_x")) b.test = conjugate_gaussian_model(m0, v0, s2, get_vec(spec, "test_x", {}));
  } else if (name == "correlated_gaussian") {
    check_known(spec, "model", {"name", "mu", "precision"});
    const auto mu = get_vec(spec, "mu", {0.0, 0.0});
    const auto prec = get<std::vector<std::vector<double>>>(spec, "precision", {{2.0, 0.6}, {0.6, 2.0}});
    Matrix P(static_cast<Eigen::Index>(prec.size()), static_cast<Eigen::Index>(prec.size()));
    for (std::size_t i = 0; i < prec.size(); ++i) {
      if (prec[i].size() != prec.size()) throw ConfigError("model.precision must be square");
      for (std::size_t k = 0; k < prec.size(); ++k)
        P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = prec[i][k];
    }
    b.model = correlated_gaussian_target(to_vector(mu), P);
  } else if (name == "bnn_regression") {
    check_known(spec, "model", {"name", "data", "target", "hidden", "sigma", "split", "normalize", "data_seed"});
    const auto path = require<std::string>(spec, "data", "model");
    const auto target = require<std::string>(spec, "target", "model");
    const auto hidden = get_count(spec, "hidden", 50);
    const double sigma = get(spec, "sigma", 1.0);
    auto [tr, te] = load_csv_dataset(path, target, get(spec, "normalize", true), get(spec, "split", 0.9),
                                     get_seed(spec, "data_seed"));
    b.train_data = std::make_shared<const Dataset>(std::move(tr));
    b.model = bnn_regression_model(hidden, sigma, b.train_data);
    if (te.size() > 0) {
      b.test_data = std::make_shared<const Dataset>(std::move(te));
      b.test = bnn_regression_model(hidden, sigma, b.test_data);
    }
  } else {
    throw ConfigError("unknown model '" + name +
                      "' (synthetic_sin|conjugate_gaussian|correlated_gaussian|bnn_regression)");
  }
  return b;
}

FamilyPtr build_family(json& spec, const LatentModel& model) {
  const std::string def = model.name() == "synthetic_sin" ? "uniform_width" : "diag_gaussian";
  const auto name = get<std::string>(spec, "name", def);
  check_known(spec, "family", {"name", "theta", "init_scale", "init_log_sigma", "init_seed"});
  if (name == "uniform_width") {
    if (model.latent_dim() != 1) throw ConfigError("uniform_width needs a 1-D latent model");
    return uniform_width_family();
  }
  if (name == "diag_gaussian") {
    // Networks need symmetry breaking and a tight start.
    if (model.name() == "bnn_regression") {
      get(spec, "init_scale", 0.1);
      get(spec, "init_log_sigma", -3.0);
    }
    return diag_gaussian_family(model.latent_dim());
  }
  throw ConfigError("unknown family '" + name + "' (uniform_width|diag_gaussian)");
}

Vector build_theta(json& spec, const VariationalFamily& family) {
  if (spec.contains("theta")) {
    const auto t = get_vec(spec, "theta", {});
    if (t.size() != family.param_dim())
      throw ConfigError("family.theta needs " + std::to_string(family.param_dim()) + " values");
    return to_vector(t);
  }
  if (family.name() == "uniform_width") return to_vector(get_vec(spec, "theta", {1.1}));
  // Diagonal Gaussian: random means (symmetry breaking for networks), fixed log sd.
  const double scale = get(spec, "init_scale", 0.0);
  const double log_sigma = get(spec, "init_log_sigma", 0.0);
  Rng rng = make_stream(get_seed(spec, "init_seed"), 0x696e6974);
  const auto d = static_cast<Eigen::Index>(family.latent_dim());
  Vector theta(2 * d);
  for (Eigen::Index i = 0; i < d; ++i) theta[i] = scale * standard_normal(rng);
  theta.tail(d).setConstant(log_sigma);
  return theta;
}

DivergenceGenerator build_divergence(json& spec) {
  check_known(spec, "divergence", {"name", "params", "direction"});
  const auto name = require<std::string>(spec, "name", "divergence");
  ParamMap params;
  json& p = spec["params"];
  if (p.is_null()) p = json::object();
  if (!p.is_object()) throw ConfigError("divergence.params must be a table");
  for (auto it = p.begin(); it != p.end(); ++it) {
    if (!it->is_number()) throw ConfigError("divergence parameter '" + it.key() + "' must be a number");
    params[it.key()] = it->get<double>();
  }
  return registry_lookup(name, params);
}

Direction build_direction(json& spec, const DivergenceGenerator&) {
  return parse_direction(get<std::string>(spec, "direction", "reverse"));
}

json cmd_bound(json config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_known(config, "", {"command", "model", "family", "divergence", "estimator", "output"});
  auto bundle = build_model(section(config, "model"));
  auto fam = build_family(section(config, "family"), *bundle.model);
  const Vector theta = build_theta(section(config, "family"), *fam);
  json& dspec = section(config, "divergence");
  const auto g = build_divergence(dspec);
  const auto dir = build_direction(dspec, g);
  json& est = section(config, "estimator");
  check_known(est, "estimator", {"K", "L", "seed", "threads"});
  const auto K = get_count(est, "K", 1000);
  const auto L = get_count(est, "L", 1);
  const auto seed = get_seed(est);
  auto opt = estimator_options(est);
  json& out = section(config, "output");
  check_known(out, "output", {"samples_csv"});
  const auto samples_csv = get<std::string>(out, "samples_csv", "");
  opt.keep_samples = !samples_csv.empty();

  json diag = {{"warnings", json::array()}};
  const auto checked = fam->check_theta(theta);
  if (!checked.warning.empty()) diag["warnings"].push_back(checked.warning);
  const auto b = L > 1 ? iw_bound_mc(g, dir, *bundle.model, *fam, theta, K, L, seed, opt)
                       : bound_mc(g, dir, *bundle.model, *fam, theta, K, seed, opt);
  json res;
  res["bound"] = bound_json(b);
  if (const auto lp = oracle_log_evidence(*bundle.model)) {
    res["oracle"] = {{"log_evidence", *lp},
                     {"bound_target", bound_side(g, dir).at_log(*lp)}};
  }
  diag["degenerate_samples"] = b.zero_ratio + b.outside_domain;
  if (!samples_csv.empty()) {
    std::string text = "k,log_ratio\n";
    char buf[64];
    for (std::size_t k = 0; k < b.log_ratios.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k, b.log_ratios[k]);
      text += buf;
    }
    write_text(samples_csv, text);
  }
  return make_record(config, std::move(res), seconds_since(t0), std::move(diag));
}

json cmd_sandwich(json config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_known(config, "", {"command", "model", "family", "upper", "lower", "estimator", "sweep", "output"});
  json& mspec = section(config, "model");
  json& uspec = section(config, "upper");
  json& lspec = section(config, "lower");
  const BoundSpec upper{build_divergence(uspec), Direction::reverse};
  const BoundSpec lower{build_divergence(lspec), Direction::reverse};
  const BoundSpec up{upper.generator, build_direction(uspec, upper.generator)};
  const BoundSpec lo{lower.generator, build_direction(lspec, lower.generator)};
  json& est = section(config, "estimator");
  check_known(est, "estimator", {"K", "L", "seed", "threads"});
  const auto K = get_count(est, "K", 1000);
  const auto L = get_count(est, "L", 1);
  const auto seed = get_seed(est);
  const auto opt = estimator_options(est);
  json& out = section(config, "output");
  check_known(out, "output", {"csv"});
  const auto csv = get<std::string>(out, "csv", "");

  std::vector<std::optional<double>> xs;
  if (config.contains("sweep")) {
    for (double x : sweep_points(section(config, "sweep"))) xs.push_back(x);
  } else {
    xs.push_back(std::nullopt);
  }

  json points = json::array();
  json diag = {{"warnings", json::array()}, {"invalid_sides", 0}};
  std::string text = "x,lower,upper,oracle,log_lower,log_upper,log_oracle,lower_valid,upper_valid\n";
  for (const auto& x : xs) {
    json spec = mspec;
    if (x) spec["x"] = json::array({*x});
    auto bundle = build_model(spec);
    if (!x) mspec = spec;
    auto fam = build_family(section(config, "family"), *bundle.model);
    const Vector theta = build_theta(section(config, "family"), *fam);
    const auto s = sandwich(up, lo, *bundle.model, *fam, theta, K, L, seed, opt);
    json p;
    if (x) p["x"] = *x;
    p["lower"] = side_json(s.lower);
    p["upper"] = side_json(s.upper);
    p["ordered"] = s.ordered();
    const auto lp = oracle_log_evidence(*bundle.model);
    p["oracle_log_evidence"] = lp ? json(*lp) : json(nullptr);
    if (lp) {
      p["contains_oracle"] = (!s.lower.valid || s.lower.log_evidence <= *lp) &&
                             (!s.upper.valid || *lp <= s.upper.log_evidence);
    }
    diag["invalid_sides"] = diag["invalid_sides"].get<int>() + !s.lower.valid + !s.upper.valid;
    points.push_back(std::move(p));
    char buf[512];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                  x.value_or(kNaN), s.lower.evidence, s.upper.evidence, lp ? std::exp(*lp) : kNaN,
                  s.lower.log_evidence, s.upper.log_evidence, lp.value_or(kNaN), s.lower.valid ? 1 : 0,
                  s.upper.valid ? 1 : 0);
    text += buf;
  }
  if (!csv.empty()) write_text(csv, text);
  json res;
  if (xs.size() == 1 && !xs[0]) {
    res = points[0];
  } else {
    res["points"] = std::move(points);
  }
  return make_record(config, std::move(res), seconds_since(t0), std::move(diag));
}

json cmd_train(json config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_known(config, "", {"command", "model", "family", "divergence", "train", "eval", "output"});
  auto bundle = build_model(section(config, "model"));
  auto fam = build_family(section(config, "family"), *bundle.model);
  const Vector theta0 = build_theta(section(config, "family"), *fam);
  json& dspec = section(config, "divergence");
  TrainConfig tc;
  tc.generator = build_divergence(dspec);
  tc.direction = build_direction(dspec, tc.generator);

  json& t = section(config, "train");
  check_known(t, "train", {"optimizer", "lr", "beta1", "beta2", "eps", "epochs", "batch_size", "K", "L",
                           "gradient", "objective", "tol", "patience", "ema_decay", "clip_norm",
                           "theta_every", "seed", "threads"});
  tc.optimizer = parse_optimizer_kind(get<std::string>(t, "optimizer", "adam"));
  const bool bnn = bundle.model->name() == "bnn_regression";
  tc.hyper.lr = get(t, "lr", bnn ? 1e-3 : 1e-2);
  tc.hyper.beta1 = get(t, "beta1", 0.9);
  tc.hyper.beta2 = get(t, "beta2", 0.999);
  tc.hyper.eps = get(t, "eps", 1e-8);
  tc.epochs = get_count(t, "epochs", 100);
  tc.batch_size = get_count(t, "batch_size", 0);
  tc.K = get_count(t, "K", 100);
  tc.L = get_count(t, "L", 1);
  tc.gradient = parse_gradient_kind(get<std::string>(t, "gradient", tc.L > 1 ? "iw_reparam" : "reparam"));
  tc.objective = parse_objective(get<std::string>(t, "objective", "raw"));
  tc.tol = get(t, "tol", 1e-5);
  tc.patience = get_count(t, "patience", 20);
  tc.ema_decay = get(t, "ema_decay", 0.9);
  tc.clip_norm = get(t, "clip_norm", 1e3);
  tc.theta_every = get_count(t, "theta_every", 0);
  tc.seed = get_seed(t);
  tc.estimator = estimator_options(t);

  json& ev = section(config, "eval");
  check_known(ev, "eval", {"K", "L", "seed", "predictive_samples"});
  const auto eK = get_count(ev, "K", 10000);
  const auto eL = get_count(ev, "L", tc.L);
  const auto eseed = get_seed(ev);
  const auto pred = get_count(ev, "predictive_samples", 100);

  json& out = section(config, "output");
  check_known(out, "output", {"trace"});
  const auto trace_path = get<std::string>(out, "trace", "");

  const auto r = train(*bundle.model, *fam, theta0, tc);
  json res;
  res["theta"] = to_std(r.theta);
  json trace = json::array();
  for (const auto& s : r.trace.steps) {
    json j = {{"epoch", s.epoch},         {"step", s.step}, {"bound", s.bound},
              {"objective", s.objective}, {"ema", s.ema},   {"grad_norm", s.grad_norm},
              {"clipped", s.clipped},     {"degenerate", s.degenerate}};
    if (s.theta) j["theta"] = to_std(*s.theta);
    trace.push_back(std::move(j));
  }
  res["trace"] = std::move(trace);
  res["steps"] = r.trace.steps.size();
  res["converged"] = r.trace.converged;
  res["stop_reason"] = r.trace.stop_reason;

  auto evaluate = [&](const LatentModel& m) {
    const auto b = eL > 1 ? iw_bound_mc(tc.generator, tc.direction, m, *fam, r.theta, eK, eL, eseed)
                          : bound_mc(tc.generator, tc.direction, m, *fam, r.theta, eK, eseed);
    json j = bound_json(b);
    if (const auto lp = oracle_log_evidence(m)) j["oracle_log_evidence"] = *lp;
    return j;
  };
  res["train_bound"] = evaluate(*bundle.model);
  if (bundle.test) res["test_bound"] = evaluate(*bundle.test);
  if (bnn) {
    const auto& bm = dynamic_cast<const BnnRegressionModel&>(*bundle.model);
    res["rmse_train"] = bnn_rmse(bm, *bundle.train_data, *fam, r.theta, pred, eseed);
    if (bundle.test_data) res["rmse_test"] = bnn_rmse(bm, *bundle.test_data, *fam, r.theta, pred, eseed);
  }
  if (!trace_path.empty()) write_text(trace_path, r.trace.to_json_lines());
  json diag = {{"clip_count", r.trace.clip_count},
               {"degenerate_samples", r.trace.degenerate_total},
               {"warnings", json::array()}};
  json rec = make_record(config, std::move(res), seconds_since(t0), std::move(diag));
  rec["timing"]["train_seconds"] = r.trace.wall_seconds;
  return rec;
}

json cmd_meanfield(json config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_known(config, "", {"command", "model", "divergence", "meanfield", "output"});
  json& mspec = section(config, "model");
  if (!mspec.contains("name")) mspec["name"] = "correlated_gaussian";
  auto bundle = build_model(mspec);
  json& dspec = section(config, "divergence");
  if (!dspec.contains("name")) dspec["name"] = "kl";
  check_known(dspec, "divergence", {"name", "params"});
  const auto g = build_divergence(dspec);

  json& mf = section(config, "meanfield");
  check_known(mf, "meanfield", {"max_sweeps", "tol", "grid_points", "grid_halfwidth", "gh_nodes",
                                "mc_samples", "seed", "analytic", "init_mean", "init_var"});
  MeanFieldOptions o;
  const auto sweeps = get_count(mf, "max_sweeps", 50);
  const double tol = get(mf, "tol", 1e-12);
  o.grid_points = get_count(mf, "grid_points", o.grid_points);
  o.grid_halfwidth = get(mf, "grid_halfwidth", o.grid_halfwidth);
  o.gauss_hermite_nodes = get_count(mf, "gh_nodes", o.gauss_hermite_nodes);
  o.mc_samples = get_count(mf, "mc_samples", o.mc_samples);
  o.seed = get_seed(mf);
  o.analytic = get(mf, "analytic", true);
  const std::size_t J = bundle.model->latent_dim();
  const auto im = get_vec(mf, "init_mean", std::vector<double>(J, 0.0));
  const auto iv = get_vec(mf, "init_var", std::vector<double>(J, 1.0));
  if (im.size() != J || iv.size() != J)
    throw ConfigError("meanfield.init_mean and init_var need one value per latent dimension");
  std::vector<GaussianFactor> init;
  for (std::size_t j = 0; j < J; ++j) init.push_back({im[j], iv[j]});

  json& out = section(config, "output");
  check_known(out, "output", {"csv_dir"});
  const auto csv_dir = get<std::string>(out, "csv_dir", "");

  const auto s = run_meanfield(*bundle.model, initial_state(init), g, sweeps, tol, o);
  json res;
  res["rule"] = to_string(s.rule);
  res["converged"] = s.converged;
  res["sweeps"] = s.iterations;
  res["bound_trace"] = s.bound_trace;
  res["update_trace"] = s.update_trace;
  res["max_update_increase"] = s.max_update_increase;
  res["clamped_points"] = s.clamped_points;
  json factors = json::array();
  for (std::size_t j = 0; j < J; ++j) {
    const auto& f = s.factors[j];
    factors.push_back({{"index", j},
                       {"kind", f.gridded() ? "grid" : "gaussian"},
                       {"mean", f.mean()},
                       {"var", f.var()}});
    if (!csv_dir.empty()) {
      std::filesystem::create_directories(csv_dir);
      write_text((std::filesystem::path(csv_dir) / ("factor_" + std::to_string(j) + ".csv")).string(),
                 factor_csv(f, o));
    }
  }
  res["factors"] = std::move(factors);
  if (const auto* t = dynamic_cast<const CorrelatedGaussianTarget*>(bundle.model.get())) {
    json ref = json::array();
    for (std::size_t j = 0; j < J; ++j) {
      const auto i = static_cast<Eigen::Index>(j);
      ref.push_back({{"cavi_mean", t->mu()[i]},
                     {"cavi_var", 1.0 / t->precision()(i, i)},
                     {"marginal_var", t->covariance()(i, i)}});
    }
    res["reference"] = std::move(ref);
  }
  json diag = {{"clamped_points", s.clamped_points}, {"warnings", json::array()}};
  if (s.clamped_points > 0)
    diag["warnings"].push_back("inverse clamped to 0 at " + std::to_string(s.clamped_points) + " grid points");
  if (!s.converged) diag["warnings"].push_back("not converged after max_sweeps");
  return make_record(config, std::move(res), seconds_since(t0), std::move(diag));
}

json cmd_check(json config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_known(config, "", {"command", "check"});
  json& c = section(config, "check");
  check_known(c, "check", {"level"});
  const auto level = get<std::string>(c, "level", "quick");
  if (level != "quick" && level != "full") throw ConfigError("check.level must be quick or full");
  const auto report = run_check_suite(level == "full");
  json checks = json::array();
  std::size_t failed = 0;
  for (const auto& r : report) {
    checks.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"max_error", r.max_error},
                      {"tolerance", r.tolerance},
                      {"detail", r.detail}});
    failed += !r.passed;
  }
  json res = {{"level", level}, {"checks", std::move(checks)}, {"passed", report.size() - failed},
              {"failed", failed}};
  return make_record(config, std::move(res), seconds_since(t0), json{{"warnings", json::array()}});
}

json cmd_dataset(json config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_known(config, "", {"command", "dataset"});
  json& d = section(config, "dataset");
  check_known(d, "dataset", {"csv", "target", "split", "normalize", "seed", "train_out", "test_out"});
  const auto path = require<std::string>(d, "csv", "dataset");
  const auto target = get<std::string>(d, "target", "");
  const double split = get(d, "split", 0.9);
  const bool norm = get(d, "normalize", true);
  const auto seed = get_seed(d);
  const auto train_out = get<std::string>(d, "train_out", "");
  const auto test_out = get<std::string>(d, "test_out", "");
  const auto [tr, te] = load_csv_dataset(path, target, norm, split, seed);
  if (!train_out.empty()) write_csv_dataset(tr, train_out);
  if (!test_out.empty()) write_csv_dataset(te, test_out);
  json res = {{"n_train", tr.size()}, {"n_test", te.size()}, {"features", tr.feature_names},
              {"target", tr.target_name}};
  if (tr.normalization) {
    res["normalization"] = {{"columns", tr.normalization->columns},
                            {"mean", to_std(tr.normalization->mean)},
                            {"sd", to_std(tr.normalization->sd)}};
  }
  return make_record(config, std::move(res), seconds_since(t0), json{{"warnings", json::array()}});
}

json run_command(json config) {
  expand_shorthand(config);
  const auto cmd = require<std::string>(config, "command", "");
  if (cmd == "bound") return cmd_bound(std::move(config));
  if (cmd == "sandwich") return cmd_sandwich(std::move(config));
  if (cmd == "train") return cmd_train(std::move(config));
  if (cmd == "meanfield") return cmd_meanfield(std::move(config));
  if (cmd == "check") return cmd_check(std::move(config));
  if (cmd == "dataset") return cmd_dataset(std::move(config));
  throw ConfigError("unknown command '" + cmd + "'");
}

int record_exit_code(const json& record) {
  const auto& r = record.at("results");
  if (record.at("config").value("command", "") == "check" && r.value("failed", 0) > 0)
    return kExitInvariant;
  return kExitOk;
}

}  // namespace fvi::cli
