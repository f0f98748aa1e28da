// Copyright 2026 The marsim Authors
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

// Counter-based noise. Every random draw is a pure function of a key tuple,
// so results never depend on evaluation order or thread schedule.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string_view>
#include <utility>

#include "marsim/core/types.hpp"

namespace marsim::noise {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  // splitmix64 finaliser
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Hash an ordered tuple of counters into 64 bits.
inline constexpr std::uint64_t hash_key(std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t k : key) h = mix64(h ^ mix64(k));
  return h;
}

inline constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Uniform in the open interval (0, 1).
inline double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline double uniform(std::initializer_list<std::uint64_t> key) { return to_unit_open(hash_key(key)); }

/// Uniform in [-1, 1).
inline double uniform_signed(std::initializer_list<std::uint64_t> key) { return 2.0 * uniform(key) - 1.0; }

/// Standard normal draw via Box-Muller on two decorrelated hashes of the key.
inline double gaussian(std::initializer_list<std::uint64_t> key) {
  const std::uint64_t h = hash_key(key);
  const double u1 = to_unit_open(mix64(h ^ 0x5851f42d4c957f2dULL));
  const double u2 = to_unit_open(mix64(h ^ 0x14057b7ef767814fULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

/// Improved Perlin noise on a 3-D lattice, permutation table seeded by hashing.
class Perlin3 {
 public:
  explicit Perlin3(std::uint64_t seed) {
    std::array<int, 256> p{};
    std::iota(p.begin(), p.end(), 0);
    for (int i = 255; i > 0; --i) {
      const auto j = static_cast<int>(hash_key({seed, 0x7065726cULL, static_cast<std::uint64_t>(i)}) %
                                      static_cast<std::uint64_t>(i + 1));
      std::swap(p[i], p[j]);
    }
    for (int i = 0; i < 512; ++i) perm_[i] = p[i & 255];
  }

  /// Value in [-1, 1].
  double operator()(double x, double y, double z) const {
    const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
    const int X = static_cast<int>(static_cast<long long>(fx) & 255);
    const int Y = static_cast<int>(static_cast<long long>(fy) & 255);
    const int Z = static_cast<int>(static_cast<long long>(fz) & 255);
    x -= fx;
    y -= fy;
    z -= fz;
    const double u = fade(x), v = fade(y), w = fade(z);
    const int A = perm_[X] + Y, AA = perm_[A] + Z, AB = perm_[A + 1] + Z;
    const int B = perm_[X + 1] + Y, BA = perm_[B] + Z, BB = perm_[B + 1] + Z;
    const double n =
        lerp(w,
             lerp(v, lerp(u, grad(perm_[AA], x, y, z), grad(perm_[BA], x - 1, y, z)),
                  lerp(u, grad(perm_[AB], x, y - 1, z), grad(perm_[BB], x - 1, y - 1, z))),
             lerp(v, lerp(u, grad(perm_[AA + 1], x, y, z - 1), grad(perm_[BA + 1], x - 1, y, z - 1)),
                  lerp(u, grad(perm_[AB + 1], x, y - 1, z - 1), grad(perm_[BB + 1], x - 1, y - 1, z - 1))));
    return std::clamp(n, -1.0, 1.0);
  }

 private:
  static double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }
  static double lerp(double t, double a, double b) { return a + t * (b - a); }
  static double grad(int hash, double x, double y, double z) {
    const int h = hash & 15;
    const double u = h < 8 ? x : y;
    const double v = h < 4 ? y : (h == 12 || h == 14 ? x : z);
    return ((h & 1) == 0 ? u : -u) + ((h & 2) == 0 ? v : -v);
  }

  std::array<int, 512> perm_{};
};

}  // namespace marsim::noise
