// Copyright (c) 2026 framekws contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KWS_RNG_H_
#define KWS_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>

#include "kws/common.h"

namespace kws {

// Deterministic RNG. The engine is std::mt19937_64 (bit-exact by the
// standard); the distributions are implemented here rather than with
// std:: distributions, whose output is not pinned across library
// implementations. Every stochastic component of the system draws from
// one of these methods so runs are reproducible from the seed alone.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t NextU64() { return gen_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  int64_t UniformInt(int64_t n) {
    Require(n > 0, "Rng::UniformInt: n must be positive");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = NextU64();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
  }

  // Inclusive integer range [lo, hi].
  int64_t UniformInt(int64_t lo, int64_t hi) {
    return lo + UniformInt(hi - lo + 1);
  }

  // Standard normal via Box-Muller.
  double Gaussian() {
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Derives an independent stream seed (splitmix64 finalizer over the
  // pair), used for per-utterance / per-step sub-streams.
  static uint64_t Derive(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace kws

#endif  // KWS_RNG_H_
