#pragma once

#include <cstdint>
#include <random>

namespace fvi {

using Rng = std::mt19937_64;

// Independent substream `stream` of the generator family rooted at `seed`.
// Monte Carlo loops draw chunk c from make_stream(seed, c), so results depend
// only on (seed, chunk layout) and not on thread scheduling.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

double standard_normal(Rng& rng);

// Uniform on the open interval (0, 1).
double uniform01(Rng& rng);

}  // namespace fvi
