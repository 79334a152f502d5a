// Copyright 2026 The intentloop Authors
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
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>

namespace intentloop {

/// Seed streams. Each consumer of randomness mixes its own tag into the
/// session seed so that adding draws in one stage never shifts another.
enum class Stream : std::uint64_t {
  layout = 0x4c41594f,
  generate = 0x47454e45,
  detect = 0x44455445,
  corpus = 0x434f5250,
  prompt = 0x50524f4d,
  self_place = 0x53454c46,
  reroll = 0x5245524f,
};

inline constexpr std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// 64-bit seed mixing (splitmix style). Not commutative.
inline constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t value) {
  return splitmix64_finalize(base + 0x9e3779b97f4a7c15ULL * (value + 1));
}

inline constexpr std::uint64_t mix_seed(std::uint64_t base, Stream stream) {
  return mix_seed(base, static_cast<std::uint64_t>(stream));
}

/// Seeded generator with distributions written out by hand: the standard
/// library pins mt19937_64's output but not the algorithms behind
/// uniform_real_distribution and friends, and every serialized artifact
/// must be byte-stable across toolchains.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  /// Standard normal via Box-Muller; one value per call.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Normal(0, sigma) truncated to [-3 sigma, 3 sigma] by resampling.
  double truncated_normal(double sigma) {
    if (sigma <= 0.0) return 0.0;
    for (;;) {
      const double z = normal();
      if (std::abs(z) <= 3.0) return z * sigma;
    }
  }

  /// Knuth's multiplication method; fine for the small means used here.
  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace intentloop
