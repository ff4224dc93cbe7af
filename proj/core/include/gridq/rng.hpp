/*
 * Copyright (c) The gridq Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace gridq {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Deterministic random stream. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the draws layered on top are implemented
// here because the std distributions are implementation-defined.
//
// A stream is single-owner. Parallel work takes child streams via split().
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). n must be nonzero.
  std::uint64_t uniform(std::uint64_t n);

  // Uniform real in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller.
  double normal();

  // Fisher-Yates, back to front.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  // Child stream whose identity depends only on this stream's seed and the
  // stream id, never on how much of this stream has been consumed.
  Rng split(std::uint64_t stream_id) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL)));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace gridq
