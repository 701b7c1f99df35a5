// Copyright 2026 The metacam Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace metacam {

/// Seeded random source used everywhere randomness is needed.
///
/// Wraps std::mt19937_64 but implements the double-producing draws by hand
/// (53-bit mantissa trick, Box-Muller) instead of the standard distributions,
/// whose output is implementation-defined. A run is then reproducible from
/// its seeds regardless of the standard library shipping with the compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased for any n.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal draw via Box-Muller. One value per call; the spare
  /// cosine branch is discarded so draw order stays easy to reason about.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Derive an independent stream, e.g. one per episode or task index.
  Rng fork(std::uint64_t stream) {
    const std::uint64_t mix = engine_() ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    return Rng(mix);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace metacam
