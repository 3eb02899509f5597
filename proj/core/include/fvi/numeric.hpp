#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>

namespace fvi {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLog2Pi = 1.83787706640934548356;

// Pairwise (cascade) summation; the association order depends only on the
// length, so sums are reproducible for a fixed layout.
double pairwise_sum(std::span<const double> x);

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Sample mean and sample-std / sqrt(n). n = 1 gives stderr 0.
MeanStderr mean_stderr(std::span<const double> x);

// log(sum exp(x)); -inf for an empty span or all -inf entries.
double log_sum_exp(std::span<const double> x);
double log_mean_exp(std::span<const double> x);

// Splits [0, n) into chunks of `chunk` items and calls fn(chunk_index, begin,
// end) for each, on up to `threads` worker threads. fn must only write to
// per-chunk storage.
void for_each_chunk(std::size_t n, std::size_t chunk, unsigned threads,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace fvi
