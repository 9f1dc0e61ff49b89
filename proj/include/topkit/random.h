// Copyright 2026 The topkit Authors
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

// Seeded randomness with a bit-exact definition. std::mt19937_64's output
// sequence is fixed by the standard, but the <random> distributions are not,
// so the uniform draws below are spelled out by hand.

#ifndef TOPKIT_RANDOM_H_
#define TOPKIT_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace topkit {

using Engine = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed for the k-th draw attached to `tag` (usually a sample id). Depends
// only on its arguments, so work can be split across threads freely.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                    std::uint64_t k) {
  return mix64(mix64(seed ^ mix64(fnv1a64(tag))) + k);
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n), n > 0, by rejection.
inline std::size_t uniform_index(Engine& engine, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do {
    x = engine();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

template <typename T>
void shuffle(T& items, Engine& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = uniform_index(engine, i);
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace topkit

#endif  // TOPKIT_RANDOM_H_
