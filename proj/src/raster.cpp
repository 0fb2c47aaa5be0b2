// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "upat/errors.hpp"

namespace upat {

void write_pnm(const std::string& path, const Raster& image) {
  if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("write_pnm: 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << (image.channels == 1 ? "P5" : "P6") << "\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

Raster read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::string magic;
  int maxval = 0;
  Raster r;
  in >> magic >> r.width >> r.height >> maxval;
  in.get();
  if ((magic != "P5" && magic != "P6") || maxval != 255) throw DataError(path + ": unsupported PNM header");
  r.channels = magic == "P5" ? 1 : 3;
  r.pixels.resize(static_cast<std::size_t>(r.width) * r.height * r.channels);
  in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
  if (!in) throw DataError(path + ": truncated raster");
  return r;
}

Raster to_raster(const std::vector<double>& unit_values, int width, int height, int channels) {
  Raster r{width, height, channels, {}};
  if (unit_values.size() != static_cast<std::size_t>(width) * height * channels) {
    throw std::invalid_argument("to_raster: size mismatch");
  }
  r.pixels.reserve(unit_values.size());
  for (double v : unit_values) {
    r.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return r;
}

}  // namespace upat
