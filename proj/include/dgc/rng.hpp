// Copyright 2026 The dgcsim Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <cmath>
#include <cstdint>

namespace dgc {

// What a stream is consumed for. Part of the stream key, so draws for one
// purpose never alias draws for another.
enum class StreamPurpose : std::uint32_t {
  kGeneric = 0,
  kDataGen = 1,
  kWeightInit = 2,
  kShuffle = 3,
  kMinibatch = 4,
  kThresholdSample = 5,
};

namespace detail {

// SplitMix64 finalizer (Steele et al.). Used both to derive stream keys and
// to produce draws from a counter.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Counter-based random stream keyed on (seed, node, iteration, purpose).
// Identical keys give identical draw sequences regardless of what any other
// stream did, so simulation output does not depend on execution order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t node, std::uint64_t iteration,
            StreamPurpose purpose)
      : seed_(seed), node_(node), iteration_(iteration), purpose_(purpose) {
    std::uint64_t k = detail::mix64(seed + kGolden);
    k = detail::mix64(k ^ (node + kGolden));
    k = detail::mix64(k ^ (iteration + kGolden));
    key_ = detail::mix64(k ^ (static_cast<std::uint64_t>(purpose) + kGolden));
  }

  std::uint64_t next_u64() {
    return detail::mix64(key_ + (++counter_) * kGolden);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  float next_float() { return static_cast<float>(next_double()); }

  // Uniform in [0, n). n must be nonzero.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; consumes two draws per call.
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t node() const { return node_; }
  std::uint64_t iteration() const { return iteration_; }
  StreamPurpose purpose() const { return purpose_; }
  std::uint64_t key() const { return key_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  static constexpr double kPi = 3.14159265358979323846;

  std::uint64_t seed_;
  std::uint64_t node_;
  std::uint64_t iteration_;
  StreamPurpose purpose_;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

inline RngStream derive_stream(std::uint64_t seed, std::uint64_t node,
                               std::uint64_t iteration, StreamPurpose purpose) {
  return RngStream(seed, node, iteration, purpose);
}

}  // namespace dgc
