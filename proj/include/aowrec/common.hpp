/*
 * Copyright 2026 The aowrec Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef AOWREC_COMMON_HPP_
#define AOWREC_COMMON_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aowrec {

// Dense item index, 0 <= id < vocab_size.
using ItemId = std::int32_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (dataset lines, watermark files).
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Model file problems: bad magic, unknown version, wrong kind, truncation.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Training loss became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t Fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-stage sub-seed: a fixed function of (seed, label), so that changing one
// stage's label never perturbs another stage's stream.
inline std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view label) {
  return SplitMix64(seed ^ Fnv1a64(label));
}

inline std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t index) {
  return SplitMix64(SplitMix64(seed) ^ SplitMix64(index + 0x51ed270b7a1c3f9dULL));
}

// Shortest decimal form that parses back to the same double.
inline std::string FormatShortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string HexDigest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Seeded random stream. Only the engine's raw output is used (mt19937_64 is
// fully specified), so draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n), unbiased.
  std::uint64_t Below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::Below: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform integer in [lo, hi].
  std::int64_t Between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    Below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  double Normal() {
    // Box-Muller; the second variate is discarded to keep the stream simple.
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Index drawn proportionally to non-negative weights.
  template <typename Container>
  std::size_t Categorical(const Container& weights) {
    double total = 0.0;
    for (auto w : weights) total += static_cast<double>(w);
    if (!(total > 0.0)) throw std::invalid_argument("Rng::Categorical: zero mass");
    double u = Uniform() * total;
    std::size_t last_positive = 0;
    std::size_t i = 0;
    for (auto w : weights) {
      if (w > 0) {
        last_positive = i;
        if (u < static_cast<double>(w)) return i;
        u -= static_cast<double>(w);
      }
      ++i;
    }
    return last_positive;
  }

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[Below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace aowrec

#endif  // AOWREC_COMMON_HPP_
