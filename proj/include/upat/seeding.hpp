// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace upat {

// splitmix64 of (seed, stream): independent, reproducible sub-seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(derive_seed(seed, stream));
}

// Stream ids, so that each consumer draws from its own sequence.
enum SeedStream : std::uint64_t {
  kStreamDatasetGeneration = 1,
  kStreamDatasetSplit = 2,
  kStreamTraining = 3,
  kStreamModelInit = 4,
  kStreamEvaluation = 5,
  kStreamLandscape = 6,
  kStreamCorruption = 7,
};

}  // namespace upat
