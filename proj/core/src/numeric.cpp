#include "fvi/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>
#include <vector>

namespace fvi {

double pairwise_sum(std::span<const double> x) {
  constexpr std::size_t kBlock = 16;
  if (x.size() <= kBlock) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

MeanStderr mean_stderr(std::span<const double> x) {
  MeanStderr out;
  const std::size_t n = x.size();
  if (n == 0) return {kNaN, kNaN};
  out.mean = pairwise_sum(x) / static_cast<double>(n);
  if (n == 1 || !std::isfinite(out.mean)) {
    out.stderr_ = n == 1 ? 0.0 : kNaN;
    return out;
  }
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - out.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
  out.stderr_ = std::sqrt(var / static_cast<double>(n));
  return out;
}

double log_sum_exp(std::span<const double> x) {
  double m = -kInf;
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  if (x.size() == 1) return x[0];
  std::vector<double> e(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) e[i] = std::exp(x[i] - m);
  return m + std::log(pairwise_sum(e));
}

double log_mean_exp(std::span<const double> x) {
  if (x.size() == 1) return x[0];
  return log_sum_exp(x) - std::log(static_cast<double>(x.size()));
}

void for_each_chunk(std::size_t n, std::size_t chunk, unsigned threads,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (chunk == 0) chunk = 1;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  auto run = [&](std::size_t c) { fn(c, c * chunk, std::min(n, (c + 1) * chunk)); };
  if (threads <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run(c);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n_chunks));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(workers);
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < n_chunks; c += workers) run(c);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

}  // namespace fvi
