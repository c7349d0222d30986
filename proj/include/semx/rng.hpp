// Copyright 2026 The SEMX Authors. All rights reserved.
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

#ifndef SEMX_RNG_HPP_
#define SEMX_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace semx {

/// Seeded random stream.
///
/// Only the raw 64-bit engine output is taken from the standard library;
/// every derived distribution below is written out here so that a given seed
/// yields the same draws with any standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for (seed, stream id), e.g. one per epoch.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Standard normal draw (Marsaglia polar method).
  double normal();

  /// Gamma(shape, 1) draw via the Marsaglia-Tsang squeeze method. For
  /// shape < 1 draws Gamma(shape + 1) and scales by U^(1/shape).
  double gamma(double shape);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Uniform random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace semx

#endif  // SEMX_RNG_HPP_
