// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-scale ("pyramid") perturbations. At scale s every s x s tile of pixels
// shares one parameter; the full-resolution perturbation is
//
//   delta(y, x, c) = sum_s m_s * clip(level_s[y / s, x / s, c'], -r, r)
//
// with c' = c for per-channel pyramids and 0 otherwise. Tiles are anchored at
// the top-left corner; edge tiles are truncated when s does not divide the
// image size.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "upat/image.hpp"

namespace upat {

struct PyramidSpec {
  std::vector<int> scales{32, 16, 1};                 // coarse -> fine, last is 1
  std::vector<double> multipliers{20.0, 10.0, 1.0};   // m_s
  double radius = 8.0 / 255.0;                         // l-inf bound on each level
  double step_size = 8.0 / 255.0 / 10.0;               // sign-ascent step
  bool per_channel = true;

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  double multiplier_sum() const;

  bool operator==(const PyramidSpec&) const = default;
};

// One parameter grid. Values are stored row-major as (rows, cols, depth).
struct LevelGrid {
  int rows = 0;
  int cols = 0;
  int depth = 0;
  std::vector<double> values;

  LevelGrid() = default;
  LevelGrid(int r, int c, int d)
      : rows(r), cols(c), depth(d), values(static_cast<std::size_t>(r) * c * d, 0.0) {}

  double& at(int r, int c, int d) { return values[(static_cast<std::size_t>(r) * cols + c) * depth + d]; }
  double at(int r, int c, int d) const { return values[(static_cast<std::size_t>(r) * cols + c) * depth + d]; }

  bool same_shape(const LevelGrid& o) const { return rows == o.rows && cols == o.cols && depth == o.depth; }
  bool operator==(const LevelGrid&) const = default;
};

class PyramidPerturbation {
 public:
  PyramidPerturbation() = default;
  // Validates that there is one grid per scale with the expected shape.
  PyramidPerturbation(PyramidSpec spec, ImageShape target, std::vector<LevelGrid> levels);

  const PyramidSpec& spec() const { return spec_; }
  const ImageShape& target_shape() const { return target_; }
  std::span<const LevelGrid> levels() const { return levels_; }
  std::span<LevelGrid> levels() { return levels_; }
  const LevelGrid& level(std::size_t i) const { return levels_.at(i); }
  LevelGrid& level(std::size_t i) { return levels_.at(i); }

  // Largest |value| over all levels.
  double max_abs() const;

  bool operator==(const PyramidPerturbation&) const = default;

 private:
  PyramidSpec spec_;
  ImageShape target_{};
  std::vector<LevelGrid> levels_;
};

// Grid shape for `scale` over `target`: (ceil(H/s), ceil(W/s), C or 1).
LevelGrid empty_level(int scale, ImageShape target, bool per_channel);

PyramidPerturbation init_zeros(const PyramidSpec& spec, ImageShape target);

// Full-resolution HWC perturbation, clipping each level at `radius`.
std::vector<double> materialize(const PyramidPerturbation& p, double radius);

// Pulls a gradient w.r.t. the full-resolution perturbation back onto the
// levels. Entries clipped away (|v| > radius) receive zero gradient.
std::vector<LevelGrid> materialize_backward(const PyramidPerturbation& p, double radius,
                                            std::span<const double> grad_delta);

// Clamps every level value into [-radius, radius]. Idempotent.
PyramidPerturbation project(PyramidPerturbation p, double radius);
void project_in_place(PyramidPerturbation& p, double radius);

// level <- project(level + step * sign(grad), radius), with sign(0) = 0.
// Throws NumericError naming the level when a gradient entry is not finite.
PyramidPerturbation sign_ascent_update(PyramidPerturbation p, std::span<const LevelGrid> grads,
                                       double step, double radius);
void sign_ascent_update_in_place(PyramidPerturbation& p, std::span<const LevelGrid> grads,
                                 double step, double radius);

std::string level_name(int scale);  // "delta_scale_<s>"

}  // namespace upat
