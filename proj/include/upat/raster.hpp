// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace upat {

// 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  bool operator==(const Raster&) const = default;
};

// Binary PGM (P5) for one channel, PPM (P6) for three.
void write_pnm(const std::string& path, const Raster& image);
Raster read_pnm(const std::string& path);

// Quantizes values in [0, 1] to bytes with round-to-nearest.
Raster to_raster(const std::vector<double>& unit_values, int width, int height, int channels);

}  // namespace upat
