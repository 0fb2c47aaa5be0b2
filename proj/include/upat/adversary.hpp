// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Inner maximizers: the multi-step sample-wise pyramid attack, the universal
// free-gradient update, and the linear radius schedule.

#pragma once

#include <random>
#include <span>
#include <vector>

#include "upat/cost.hpp"
#include "upat/image.hpp"
#include "upat/model.hpp"
#include "upat/pyramid.hpp"

namespace upat {

// How a sign-ascent step size is chosen: a fixed value, or the current radius
// divided by a constant (`divisor <= 0` means "divide by the step count").
struct StepSize {
  bool relative = true;
  double value = 0.0;  // explicit tau when !relative, divisor when relative

  static StepSize explicit_value(double tau) { return {false, tau}; }
  static StepSize radius_over(double divisor) { return {true, divisor}; }
  static StepSize radius_over_steps() { return {true, 0.0}; }

  double resolve(double radius, int num_steps) const;
  bool operator==(const StepSize&) const = default;
};

struct AttackConfig {
  int num_steps = 5;
  PyramidSpec spec{.scales = {32, 16, 1}, .multipliers = {20.0, 10.0, 1.0}, .radius = 6.0 / 255.0,
                   .step_size = 6.0 / 255.0 / 5.0, .per_channel = true};
  bool random_init = false;
  StepSize step = StepSize::radius_over_steps();

  void validate() const;
  bool operator==(const AttackConfig&) const = default;
};

struct RadiusSchedule {
  double r_start = 8.0 / 255.0;
  double r_end = 0.8 / 255.0;
  int e_start = 30;
  int e_end = 300;
  bool enabled = false;

  void validate() const;
  bool operator==(const RadiusSchedule&) const = default;
};

// r(e) = r_start + (r_end - r_start) * max(e - e_start, 0) / (e_end - e_start),
// held at r_end past e_end. A disabled schedule returns r_start.
double radius_at_epoch(const RadiusSchedule& s, int epoch);

// clamp(x + delta, 0, 1) for every image, with `deltas` holding one
// perturbation per image or a single shared one.
ImageBatch apply_perturbation(const ImageBatch& clean, std::span<const std::vector<double>> deltas);

// Zeroes gradient entries whose pixel was clamped by apply_perturbation.
void mask_clamped(const ImageBatch& clean, std::span<const double> delta, std::size_t image,
                  std::span<double> grad);

struct AttackResult {
  std::vector<PyramidPerturbation> perturbations;  // one per sample
  ImageBatch perturbed;
  double final_loss = 0.0;  // mean loss of the last ascent step's inputs
};

// Projected sign-gradient ascent on each sample's own pyramid. Each step is
// one forward+backward over the batch and is recorded as a generation pass.
AttackResult pgd_pyramid_attack(const Classifier& model, const ImageBatch& images, std::span<const int> labels,
                                const AttackConfig& cfg, double radius, CostLedger* ledger,
                                std::mt19937_64& rng);

// Free-gradient update of the shared perturbation using level gradients from
// the training backward pass: sign ascent, then projection to r(epoch).
// Performs no model passes.
PyramidPerturbation universal_update(PyramidPerturbation p, std::span<const LevelGrid> level_grads,
                                     const RadiusSchedule& schedule, int epoch, double step);

// Sum over a batch of per-image gradients w.r.t. one shared perturbation,
// pulled back onto the pyramid levels.
std::vector<LevelGrid> shared_level_gradients(const PyramidPerturbation& p, double radius,
                                              const ImageBatch& clean, std::span<const double> delta,
                                              std::span<const double> input_grad);

}  // namespace upat
