#pragma once

#include <cstdint>
#include <random>

namespace brakesense {

/// Root of all randomness. Equal seeds give bit-identical datasets, splits
/// and model initializations.
struct RngSeed {
  std::uint64_t value = 0;
  friend bool operator==(RngSeed, RngSeed) = default;
};

using Engine = std::mt19937_64;

/// Derives an independent child seed for the given stream (SplitMix64 mixing).
RngSeed split_rng(RngSeed seed, std::uint64_t stream_id);

inline Engine make_engine(RngSeed seed) { return Engine{seed.value}; }

}  // namespace brakesense
