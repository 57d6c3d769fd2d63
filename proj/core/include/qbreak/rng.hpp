// Copyright 2026 The qbreak Authors
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

#ifndef QBREAK_RNG_HPP_
#define QBREAK_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace qbreak {

using Rng = std::mt19937_64;

// Counter-based seed derivation: stream r of a master seed is a fixed
// function of (master, r), independent of scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Stable 64-bit FNV-1a hash, used to key seeds and cache files on content.
std::uint64_t fnv1a64(std::string_view bytes);

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

}  // namespace qbreak

#endif  // QBREAK_RNG_HPP_
