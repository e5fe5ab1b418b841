#pragma once

// Counter-based derivation of independent random streams from one root seed.

#include <cstdint>
#include <random>

namespace normflow {

std::uint64_t splitmix64(std::uint64_t x);

/// Generator for stream number `counter` of the root seed.
std::mt19937_64 derive_stream(std::uint64_t root, std::uint64_t counter);

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(std::mt19937_64& rng);

/// Uniform double in [lo, hi).
double uniform(std::mt19937_64& rng, double lo, double hi);

}  // namespace normflow
