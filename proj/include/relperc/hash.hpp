#pragma once

#include <cstdint>
#include <span>

namespace relperc {

/// SplitMix64 finalizer. Used as the mixing step of every keyed hash in the
/// library, so values are reproducible across platforms and thread counts.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t hash_symbols(std::span<const std::int32_t> symbols) noexcept {
  std::uint64_t h = splitmix64(0xA0761D6478BD642FULL ^ symbols.size());
  for (std::int32_t s : symbols) {
    h = splitmix64(h ^ static_cast<std::uint32_t>(s));
  }
  return h;
}

/// Top 53 bits mapped to [0, 1).
constexpr double to_unit(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Counter-based stream: the n-th draw of stream `key` under `seed`.
constexpr std::uint64_t keyed_draw(std::uint64_t seed, std::uint64_t key,
                                   std::uint64_t n) noexcept {
  return splitmix64(hash_combine(hash_combine(seed, key), n));
}

constexpr double keyed_uniform(std::uint64_t seed, std::uint64_t key,
                               std::uint64_t n) noexcept {
  return to_unit(keyed_draw(seed, key, n));
}

/// Uniform integer in [0, bound) from a 64-bit draw (multiply-shift).
constexpr std::uint64_t bounded(std::uint64_t draw, std::uint64_t bound) noexcept {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(draw) * bound) >> 64);
}

}  // namespace relperc
