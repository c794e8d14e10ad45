#pragma once

// Counter-based randomness: every draw is a pure function of (seed, stream,
// index), so results never depend on evaluation order or thread count.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace sacp {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_words(std::uint64_t seed, std::uint64_t a) noexcept {
  return mix64(mix64(seed) ^ (a * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t hash_words(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return hash_words(hash_words(seed, a), b);
}

/// Child seed for sub-experiment `index` (trial, stream, ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return hash_words(seed ^ 0xa0761d6478bd642fULL, index);
}

/// Top 53 bits mapped to [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Sequential view over the counter space of one key. Cheap to copy.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t next_u64() noexcept { return hash_words(key_, counter_++); }

  constexpr double uniform() noexcept { return to_unit(next_u64()); }

  /// Uniform integer in [0, bound), bound > 0. Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
      if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  /// Standard normal via Box-Muller (one value per two uniforms).
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Per-pixel uniform u(r, c) in [0, 1), shared by every label of that pixel.
class RandomizationField {
 public:
  explicit constexpr RandomizationField(std::uint64_t seed) noexcept : seed_(seed) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }

  constexpr double operator()(std::size_t row, std::size_t col) const noexcept {
    return to_unit(hash_words(seed_, row, col));
  }

 private:
  std::uint64_t seed_;
};

}  // namespace sacp
