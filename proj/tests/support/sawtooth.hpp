#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "rsplab/bench.hpp"

namespace rsp::testing {

// Memory sawtooth: linear growth from low to high over one period, then an
// instant drop. Noise is uniform in +-noise * (high - low), added per sample.
inline MemoryTrace sawtooth(double low_mb, double high_mb, double period_s, std::size_t periods, double noise,
                            std::uint64_t seed, double sample_ms = 100, double phase_s = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double amp = high_mb - low_mb;
  const double span_ms = (periods + 1.5) * period_s * 1000;
  MemoryTrace trace;
  for (double t = 0; t <= span_ms; t += sample_ms) {
    const double cycle = std::fmod(t / 1000 + phase_s, period_s) / period_s;
    const double mb = low_mb + amp * cycle + noise * amp * u(rng);
    trace.add(t, static_cast<std::int64_t>(std::llround(mb * kBytesPerMB)));
  }
  return trace;
}

}  // namespace rsp::testing
