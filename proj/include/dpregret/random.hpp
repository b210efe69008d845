//
// Copyright 2026 The dpregret Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#ifndef DPREGRET_RANDOM_HPP_
#define DPREGRET_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace dpregret {

using Rng = std::mt19937_64;

// Purpose tags keep substreams for different consumers disjoint even when
// the (trial, source) indices coincide.
enum class StreamKind : std::uint64_t {
  kSeries = 1,
  kTruthWindow = 2,
  kSourceNoise = 3,
  kValidation = 4,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for the substream (base_seed, kind, trial, source). Each field is
// folded in through its own mixing round, so neighbouring indices give
// unrelated seeds.
constexpr std::uint64_t substream_seed(std::uint64_t base_seed,
                                       StreamKind kind, std::uint64_t trial,
                                       std::uint64_t source) {
  std::uint64_t h = mix64(base_seed);
  h = mix64(h ^ static_cast<std::uint64_t>(kind));
  h = mix64(h ^ trial);
  h = mix64(h ^ source);
  return h;
}

inline Rng substream(std::uint64_t base_seed, StreamKind kind,
                     std::uint64_t trial = 0, std::uint64_t source = 0) {
  return Rng(substream_seed(base_seed, kind, trial, source));
}

// Uniform on the open interval (0, 1) from the top 53 bits of one draw.
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace dpregret

#endif  // DPREGRET_RANDOM_HPP_
