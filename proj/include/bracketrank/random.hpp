// Copyright 2026 The Bracketrank Authors.
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

// Counter-based random streams.
//
// Every random decision in the library is drawn from a stream whose key is a
// hash of (seed, purpose, identifiers...). Output i of a stream depends only
// on (key, i), so work keyed this way can run in any order or on any number of
// threads and still produce identical results. The helpers below avoid the
// standard <random> distributions because their output is not specified
// across standard library implementations.

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <type_traits>
#include <utility>

namespace bracketrank {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += kGoldenGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a, 64 bit.
constexpr std::uint64_t HashString(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t MixKey(std::uint64_t key, std::uint64_t part) {
  return SplitMix64(key ^ SplitMix64(part + kGoldenGamma));
}

namespace internal {

constexpr std::uint64_t KeyPart(std::string_view text) {
  // Length is folded in so ("ab","c") and ("a","bc") differ.
  return MixKey(HashString(text), text.size());
}

template <typename T>
  requires std::is_integral_v<T>
constexpr std::uint64_t KeyPart(T value) {
  return SplitMix64(static_cast<std::uint64_t>(value) ^ 0xD6E8FEB86659FD93ULL);
}

}  // namespace internal

// Derives a stream key from a seed and any mix of strings and integers.
template <typename... Parts>
constexpr std::uint64_t StreamKey(std::uint64_t seed, const Parts&... parts) {
  std::uint64_t key = SplitMix64(seed);
  ((key = MixKey(key, internal::KeyPart(parts))), ...);
  return key;
}

class CounterStream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterStream(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() { return Next(); }

  constexpr std::uint64_t Next() {
    const std::uint64_t x = key_ ^ (counter_ * kGoldenGamma);
    ++counter_;
    return SplitMix64(SplitMix64(x));
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  constexpr double NextUnit() {
    return static_cast<double>(Next() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, bound). Lemire's multiply-shift with rejection.
  std::uint64_t NextBelow(std::uint64_t bound) {
    if (bound <= 1) return 0;
    unsigned __int128 m =
        static_cast<unsigned __int128>(Next()) * static_cast<unsigned __int128>(bound);
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(Next()) * static_cast<unsigned __int128>(bound);
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates.
template <typename T>
void Shuffle(std::span<T> items, CounterStream& stream) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.NextBelow(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace bracketrank
