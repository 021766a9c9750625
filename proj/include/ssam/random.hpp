#ifndef SSAM_RANDOM_HPP
#define SSAM_RANDOM_HPP

// Seeding scheme shared by every stochastic routine in the library.
//
// A run is identified by one 64-bit master seed. Each consumer (data
// generation, parameter noise, data sampling, Monte Carlo estimators, random
// initialisation) draws from its own mt19937_64 stream whose seed is derived
// from (master, label) with an FNV-1a hash of the label folded through
// SplitMix64. Streams with different labels are therefore independent of the
// order in which they are created, and runs are reproducible component by
// component.

#include <cstdint>
#include <random>
#include <string_view>

namespace ssam {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master) ^ h);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t master, std::string_view label) {
  return Rng(derive_seed(master, label));
}

namespace streams {
inline constexpr std::string_view data = "data";
inline constexpr std::string_view noise = "noise";
inline constexpr std::string_view sample = "sample";
inline constexpr std::string_view monte_carlo = "mc";
inline constexpr std::string_view init = "init";
inline constexpr std::string_view competitors = "competitors";
}  // namespace streams

}  // namespace ssam

#endif  // SSAM_RANDOM_HPP
