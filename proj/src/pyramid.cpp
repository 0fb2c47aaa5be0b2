// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "upat/errors.hpp"

namespace upat {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

void check_levels_match(const PyramidPerturbation& p) {
  const auto& spec = p.spec();
  if (p.levels().size() != spec.scales.size()) {
    throw std::invalid_argument("pyramid: level count does not match scale count");
  }
  for (std::size_t i = 0; i < spec.scales.size(); ++i) {
    const LevelGrid expected = empty_level(spec.scales[i], p.target_shape(), spec.per_channel);
    if (!p.level(i).same_shape(expected) ||
        p.level(i).values.size() != expected.values.size()) {
      throw std::invalid_argument("pyramid: " + level_name(spec.scales[i]) +
                                  " shape does not match target shape");
    }
  }
}

}  // namespace

void PyramidSpec::validate() const {
  if (scales.empty()) throw std::invalid_argument("PyramidSpec: at least one scale is required");
  if (scales.size() != multipliers.size()) {
    throw std::invalid_argument("PyramidSpec: scales and multipliers differ in length");
  }
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (scales[i] < 1) throw std::invalid_argument("PyramidSpec: scales must be positive");
    if (i > 0 && scales[i] >= scales[i - 1]) {
      throw std::invalid_argument("PyramidSpec: scales must be strictly decreasing");
    }
    if (!(multipliers[i] > 0.0) || !std::isfinite(multipliers[i])) {
      throw std::invalid_argument("PyramidSpec: multipliers must be positive");
    }
  }
  if (scales.back() != 1) throw std::invalid_argument("PyramidSpec: final scale must be 1");
  if (!(radius >= 0.0 && radius <= 1.0)) throw std::invalid_argument("PyramidSpec: radius must lie in [0, 1]");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw std::invalid_argument("PyramidSpec: step size must be positive");
  }
}

double PyramidSpec::multiplier_sum() const {
  return std::accumulate(multipliers.begin(), multipliers.end(), 0.0);
}

std::string level_name(int scale) { return "delta_scale_" + std::to_string(scale); }

LevelGrid empty_level(int scale, ImageShape target, bool per_channel) {
  return LevelGrid(ceil_div(target.height, scale), ceil_div(target.width, scale),
                   per_channel ? target.channels : 1);
}

PyramidPerturbation::PyramidPerturbation(PyramidSpec spec, ImageShape target,
                                         std::vector<LevelGrid> levels)
    : spec_(std::move(spec)), target_(target), levels_(std::move(levels)) {
  spec_.validate();
  check_levels_match(*this);
}

double PyramidPerturbation::max_abs() const {
  double m = 0.0;
  for (const auto& level : levels_) {
    for (double v : level.values) m = std::max(m, std::abs(v));
  }
  return m;
}

PyramidPerturbation init_zeros(const PyramidSpec& spec, ImageShape target) {
  spec.validate();
  if (target.height < 1 || target.width < 1 || target.channels < 1) {
    throw std::invalid_argument("init_zeros: target dimensions must be at least 1");
  }
  std::vector<LevelGrid> levels;
  levels.reserve(spec.scales.size());
  for (int s : spec.scales) {
    if (s > target.height && s > target.width) {
      throw std::invalid_argument("init_zeros: scale " + std::to_string(s) +
                                  " exceeds both spatial dimensions");
    }
    levels.push_back(empty_level(s, target, spec.per_channel));
  }
  return PyramidPerturbation(spec, target, std::move(levels));
}

std::vector<double> materialize(const PyramidPerturbation& p, double radius) {
  if (radius < 0.0) throw std::invalid_argument("materialize: radius must be non-negative");
  check_levels_match(p);
  const ImageShape t = p.target_shape();
  const auto& spec = p.spec();
  std::vector<double> delta(t.size(), 0.0);
  for (std::size_t li = 0; li < spec.scales.size(); ++li) {
    const int s = spec.scales[li];
    const double m = spec.multipliers[li];
    const LevelGrid& g = p.level(li);
    for (int y = 0; y < t.height; ++y) {
      const int r = y / s;
      for (int x = 0; x < t.width; ++x) {
        const int c0 = x / s;
        double* px = delta.data() + (static_cast<std::size_t>(y) * t.width + x) * t.channels;
        for (int c = 0; c < t.channels; ++c) {
          const double v = g.at(r, c0, g.depth == 1 ? 0 : c);
          px[c] += m * std::clamp(v, -radius, radius);
        }
      }
    }
  }
  return delta;
}

std::vector<LevelGrid> materialize_backward(const PyramidPerturbation& p, double radius,
                                            std::span<const double> grad_delta) {
  check_levels_match(p);
  const ImageShape t = p.target_shape();
  if (grad_delta.size() != t.size()) {
    throw std::invalid_argument("materialize_backward: gradient size does not match target shape");
  }
  const auto& spec = p.spec();
  std::vector<LevelGrid> grads;
  grads.reserve(spec.scales.size());
  for (std::size_t li = 0; li < spec.scales.size(); ++li) {
    const int s = spec.scales[li];
    const double m = spec.multipliers[li];
    const LevelGrid& g = p.level(li);
    LevelGrid out(g.rows, g.cols, g.depth);
    for (int y = 0; y < t.height; ++y) {
      const int r = y / s;
      for (int x = 0; x < t.width; ++x) {
        const int c0 = x / s;
        const double* gp = grad_delta.data() + (static_cast<std::size_t>(y) * t.width + x) * t.channels;
        for (int c = 0; c < t.channels; ++c) {
          out.at(r, c0, g.depth == 1 ? 0 : c) += gp[c];
        }
      }
    }
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      // Clamp subgradient: pass-through on the closed interval.
      out.values[i] = std::abs(g.values[i]) <= radius ? m * out.values[i] : 0.0;
    }
    grads.push_back(std::move(out));
  }
  return grads;
}

void project_in_place(PyramidPerturbation& p, double radius) {
  if (radius < 0.0) throw std::invalid_argument("project: radius must be non-negative");
  for (auto& level : p.levels()) {
    for (double& v : level.values) v = std::clamp(v, -radius, radius);
  }
}

PyramidPerturbation project(PyramidPerturbation p, double radius) {
  project_in_place(p, radius);
  return p;
}

void sign_ascent_update_in_place(PyramidPerturbation& p, std::span<const LevelGrid> grads,
                                 double step, double radius) {
  if (!(step >= 0.0)) throw std::invalid_argument("sign_ascent_update: step must be non-negative");
  if (grads.size() != p.levels().size()) {
    throw std::invalid_argument("sign_ascent_update: gradient level count mismatch");
  }
  const auto& scales = p.spec().scales;
  for (std::size_t li = 0; li < grads.size(); ++li) {
    LevelGrid& level = p.level(li);
    if (!level.same_shape(grads[li])) {
      throw std::invalid_argument("sign_ascent_update: gradient shape mismatch at " +
                                  level_name(scales[li]));
    }
    for (double g : grads[li].values) {
      if (!std::isfinite(g)) {
        throw NumericError("sign_ascent_update: non-finite gradient in " + level_name(scales[li]));
      }
    }
    for (std::size_t i = 0; i < level.values.size(); ++i) {
      const double g = grads[li].values[i];
      const double sgn = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
      level.values[i] = std::clamp(level.values[i] + step * sgn, -radius, radius);
    }
  }
}

PyramidPerturbation sign_ascent_update(PyramidPerturbation p, std::span<const LevelGrid> grads,
                                       double step, double radius) {
  sign_ascent_update_in_place(p, grads, step, radius);
  return p;
}

}  // namespace upat
