// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "upat/errors.hpp"

namespace upat {

double StepSize::resolve(double radius, int num_steps) const {
  if (!relative) return value;
  const double divisor = value > 0.0 ? value : static_cast<double>(num_steps);
  return radius / divisor;
}

void AttackConfig::validate() const {
  if (num_steps < 1) throw ConfigError("attack: num_steps must be at least 1");
  spec.validate();
  if (!step.relative && !(step.value > 0.0)) throw ConfigError("attack: explicit step size must be positive");
}

void RadiusSchedule::validate() const {
  if (!(r_start >= r_end && r_end >= 0.0)) throw ConfigError("schedule: need r_start >= r_end >= 0");
  if (!(e_end > e_start && e_start >= 0)) throw ConfigError("schedule: need e_end > e_start >= 0");
}

double radius_at_epoch(const RadiusSchedule& s, int epoch) {
  if (epoch < 0) throw std::invalid_argument("radius_at_epoch: epoch must be non-negative");
  if (!s.enabled) return s.r_start;
  if (epoch >= s.e_end) return s.r_end;
  const double progress = static_cast<double>(std::max(epoch - s.e_start, 0)) / (s.e_end - s.e_start);
  return s.r_start + (s.r_end - s.r_start) * progress;
}

ImageBatch apply_perturbation(const ImageBatch& clean, std::span<const std::vector<double>> deltas) {
  if (deltas.size() != 1 && deltas.size() != clean.count()) {
    throw std::invalid_argument("apply_perturbation: need one perturbation per image or one shared");
  }
  ImageBatch out = clean;
  const std::size_t isz = clean.shape().size();
  for (std::size_t i = 0; i < clean.count(); ++i) {
    const auto& d = deltas[deltas.size() == 1 ? 0 : i];
    if (d.size() != isz) throw std::invalid_argument("apply_perturbation: perturbation shape mismatch");
    auto img = out.image(i);
    for (std::size_t j = 0; j < isz; ++j) img[j] = std::clamp(img[j] + d[j], 0.0, 1.0);
  }
  return out;
}

void mask_clamped(const ImageBatch& clean, std::span<const double> delta, std::size_t image,
                  std::span<double> grad) {
  const auto img = clean.image(image);
  for (std::size_t j = 0; j < grad.size(); ++j) {
    const double v = img[j] + delta[j];
    if (v < 0.0 || v > 1.0) grad[j] = 0.0;
  }
}

AttackResult pgd_pyramid_attack(const Classifier& model, const ImageBatch& images, std::span<const int> labels,
                                const AttackConfig& cfg, double radius, CostLedger* ledger,
                                std::mt19937_64& rng) {
  cfg.validate();
  if (images.empty()) throw std::invalid_argument("pgd_pyramid_attack: empty batch");
  if (radius < 0.0) throw std::invalid_argument("pgd_pyramid_attack: radius must be non-negative");
  const std::size_t n = images.count();
  const std::size_t isz = images.shape().size();
  const double tau = cfg.step.resolve(radius, cfg.num_steps);

  AttackResult out;
  out.perturbations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = init_zeros(cfg.spec, images.shape());
    if (cfg.random_init) {
      std::uniform_real_distribution<double> u(-radius, radius);
      for (auto& level : p.levels()) {
        for (double& v : level.values) v = u(rng);
      }
    }
    out.perturbations.push_back(std::move(p));
  }

  const std::vector<double> weights(n, 1.0 / static_cast<double>(n));
  std::vector<std::vector<double>> deltas(n);
  for (int step = 0; step < cfg.num_steps; ++step) {
    for (std::size_t i = 0; i < n; ++i) deltas[i] = materialize(out.perturbations[i], radius);
    const ImageBatch adv = apply_perturbation(images, deltas);
    const PassResult pass = model.run(adv, labels, weights, {.parameters = false, .inputs = true});
    if (ledger) ledger->record(PassPurpose::kGeneration, n, n, true);
    out.final_loss = pass.loss;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> g(pass.input_grad.begin() + i * isz, pass.input_grad.begin() + (i + 1) * isz);
      mask_clamped(images, deltas[i], i, g);
      const auto level_grads = materialize_backward(out.perturbations[i], radius, g);
      sign_ascent_update_in_place(out.perturbations[i], level_grads, tau, radius);
    }
  }
  for (std::size_t i = 0; i < n; ++i) deltas[i] = materialize(out.perturbations[i], radius);
  out.perturbed = apply_perturbation(images, deltas);
  return out;
}

PyramidPerturbation universal_update(PyramidPerturbation p, std::span<const LevelGrid> level_grads,
                                     const RadiusSchedule& schedule, int epoch, double step) {
  sign_ascent_update_in_place(p, level_grads, step, radius_at_epoch(schedule, epoch));
  return p;
}

std::vector<LevelGrid> shared_level_gradients(const PyramidPerturbation& p, double radius,
                                              const ImageBatch& clean, std::span<const double> delta,
                                              std::span<const double> input_grad) {
  const std::size_t isz = clean.shape().size();
  if (input_grad.size() != clean.count() * isz) {
    throw std::invalid_argument("shared_level_gradients: gradient does not match batch");
  }
  std::vector<double> total(isz, 0.0);
  std::vector<double> g(isz);
  for (std::size_t i = 0; i < clean.count(); ++i) {
    std::copy(input_grad.begin() + i * isz, input_grad.begin() + (i + 1) * isz, g.begin());
    mask_clamped(clean, delta, i, g);
    for (std::size_t j = 0; j < isz; ++j) total[j] += g[j];
  }
  return materialize_backward(p, radius, total);
}

}  // namespace upat
