#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nnsdr {

/// All stochastic components draw from a 64-bit Mersenne Twister. The engine
/// sequence is fixed by the C++ standard; distribution algorithms are those
/// of the standard library in use.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Folds a list of integers into one seed: h = splitmix64(h ^ splitmix64(v))
/// starting from h = 0x9E3779B97F4A7C15 for every v in order.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) noexcept;

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng &rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace nnsdr
