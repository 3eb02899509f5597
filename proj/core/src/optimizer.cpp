#include "fvi/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fvi/errors.hpp"

namespace fvi {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer_kind(std::string_view s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + std::string(s) + "' (adam|sgd)");
}

Vector adam_step(const Vector& theta, const Vector& grad, AdamState& s, const AdamHyper& h) {
  if (s.m.size() == 0) {
    s.m = Vector::Zero(theta.size());
    s.v = Vector::Zero(theta.size());
  }
  if (s.m.size() != theta.size() || grad.size() != theta.size())
    throw ConfigError("adam_step: state and gradient dimensions must match theta");
  ++s.t;
  s.m = h.beta1 * s.m + (1.0 - h.beta1) * grad;
  s.v = h.beta2 * s.v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));
  const Vector mhat = s.m / c1;
  const Vector vhat = s.v / c2;
  return theta - h.lr * (mhat.array() / (vhat.array().sqrt() + h.eps)).matrix();
}

void TrainConfig::validate(std::size_t data_size) const {
  if (!(hyper.lr >= 0.0) || !std::isfinite(hyper.lr)) throw ConfigError("train: lr must be >= 0");
  if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0)) throw ConfigError("train: beta1 must be in [0, 1)");
  if (!(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0)) throw ConfigError("train: beta2 must be in [0, 1)");
  if (!(hyper.eps > 0.0)) throw ConfigError("train: eps must be positive");
  if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
  if (K == 0) throw ConfigError("train: K must be >= 1");
  if (L == 0) throw ConfigError("train: L must be >= 1");
  if (batch_size > data_size)
    throw ConfigError("train: batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(data_size));
  if (!(tol >= 0.0)) throw ConfigError("train: tol must be >= 0");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("train: ema_decay must be in [0, 1)");
  if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be positive");
  if (gradient != GradientKind::iw_reparam && L != 1)
    throw ConfigError("train: L > 1 needs gradient kind iw_reparam");
}

namespace {

void put_num(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

constexpr std::uint64_t kBatchStream = 0x6261746368000000ull;
constexpr std::uint64_t kStepStream = 0x7374657073000000ull;

}  // namespace

std::string TrainTrace::to_json_lines() const {
  std::string out;
  for (const auto& s : steps) {
    out += "{\"epoch\":" + std::to_string(s.epoch) + ",\"step\":" + std::to_string(s.step);
    out += ",\"bound\":";
    put_num(out, s.bound);
    out += ",\"bound_stderr\":";
    put_num(out, s.bound_stderr);
    out += ",\"objective\":";
    put_num(out, s.objective);
    out += ",\"ema\":";
    put_num(out, s.ema);
    out += ",\"grad_norm\":";
    put_num(out, s.grad_norm);
    out += std::string(",\"clipped\":") + (s.clipped ? "true" : "false");
    out += ",\"degenerate\":" + std::to_string(s.degenerate);
    if (s.theta) {
      out += ",\"theta\":[";
      for (Eigen::Index i = 0; i < s.theta->size(); ++i) {
        if (i) out += ",";
        put_num(out, (*s.theta)[i]);
      }
      out += "]";
    }
    out += "}\n";
  }
  return out;
}

TrainResult train(const LatentModel& model, const VariationalFamily& family, const Vector& theta0,
                  const TrainConfig& cfg, const StepCallback& on_step) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::size_t N = model.data_size();
  cfg.validate(N);
  const std::size_t M = (cfg.batch_size == 0 || cfg.batch_size >= N) ? N : cfg.batch_size;
  const std::size_t per_epoch = N == 0 ? 1 : (N + M - 1) / M;

  TrainResult res;
  res.theta = family.check_theta(theta0).theta;
  AdamState adam;
  Rng seeder = make_stream(cfg.seed, kStepStream);
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});

  double ema = kNaN;
  std::size_t calm = 0;
  std::size_t step = 0;
  res.trace.stop_reason = "epoch budget";

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (M < N) {
      Rng rng = make_stream(cfg.seed, kBatchStream + epoch);
      for (std::size_t i = N; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
        std::swap(order[i - 1], order[std::min(j, i - 1)]);
      }
    }
    for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
      const std::uint64_t step_seed = seeder();
      GradientEstimate g;
      if (M < N) {
        std::vector<std::size_t> batch(order.begin() + static_cast<long>(b * M),
                                       order.begin() + static_cast<long>(std::min(N, (b + 1) * M)));
        const MinibatchView view(model, std::move(batch));
        g = estimate_gradient(cfg.gradient, cfg.generator, cfg.direction, view, family, res.theta,
                              cfg.K, cfg.L, step_seed, cfg.estimator, cfg.objective);
      } else {
        g = estimate_gradient(cfg.gradient, cfg.generator, cfg.direction, model, family, res.theta,
                              cfg.K, cfg.L, step_seed, cfg.estimator, cfg.objective);
      }

      TrainStep rec;
      rec.epoch = epoch;
      rec.step = step;
      rec.bound = g.bound.value;
      rec.bound_stderr = g.bound.stderr_;
      rec.objective = g.objective_value;
      rec.degenerate = g.degenerate;
      res.trace.degenerate_total += g.degenerate;

      if (!g.value.allFinite())
        throw NumericError("train: non-finite gradient at step " + std::to_string(step) +
                           " (bound " + std::to_string(g.bound.value) + ", stderr " +
                           std::to_string(g.bound.stderr_) + ", zero-ratio samples " +
                           std::to_string(g.bound.zero_ratio) + ", log-ratio range [" +
                           std::to_string(g.bound.log_ratio_min) + ", " +
                           std::to_string(g.bound.log_ratio_max) + "])");
      Vector grad = g.value;
      rec.grad_norm = grad.norm();
      if (rec.grad_norm > cfg.clip_norm) {
        grad *= cfg.clip_norm / rec.grad_norm;
        rec.clipped = true;
        ++res.trace.clip_count;
      }

      Vector next = cfg.optimizer == OptimizerKind::adam
                        ? adam_step(res.theta, grad, adam, cfg.hyper)
                        : Vector(res.theta - cfg.hyper.lr * grad);
      try {
        res.theta = family.check_theta(next).theta;
      } catch (const ConfigError& e) {
        throw NumericError("train: step " + std::to_string(step) +
                           " left the parameter domain: " + e.what());
      }

      bool stop = false;
      if (std::isfinite(g.objective_value)) {
        const double prev = ema;
        ema = std::isnan(ema) ? g.objective_value
                              : cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * g.objective_value;
        if (!std::isnan(prev)) {
          const double rel = std::abs(ema - prev) / std::max(std::abs(prev), 1e-300);
          calm = rel < cfg.tol ? calm + 1 : 0;
          stop = cfg.patience > 0 && calm >= cfg.patience;
        }
      }
      rec.ema = ema;
      if (cfg.theta_every > 0 && step % cfg.theta_every == 0) rec.theta = res.theta;
      if (on_step) on_step(rec);
      res.trace.steps.push_back(std::move(rec));
      if (stop) {
        res.trace.converged = true;
        res.trace.stop_reason = "smoothed objective changed less than tol for " +
                                std::to_string(cfg.patience) + " evaluations";
        res.trace.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return res;
      }
    }
  }
  res.trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

}  // namespace fvi
