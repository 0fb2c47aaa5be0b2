// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "upat/errors.hpp"

namespace upat {

double learning_rate(const OptimizerConfig& cfg, std::int64_t step, std::int64_t steps_per_epoch, int epochs) {
  const std::int64_t warmup = static_cast<std::int64_t>(cfg.warmup_epochs) * steps_per_epoch;
  const std::int64_t total = static_cast<std::int64_t>(epochs) * steps_per_epoch;
  if (step < warmup) return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total <= warmup) return cfg.lr;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

AdamW::AdamW(OptimizerConfig cfg, std::size_t num_params)
    : cfg_(cfg), m_(num_params, 0.0), v_(num_params, 0.0) {}

void AdamW::step(ParameterSet& params, std::span<const double> grad, double lr) {
  if (grad.size() != params.size() || m_.size() != params.size()) {
    throw std::invalid_argument("AdamW: gradient size does not match parameters");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericError("AdamW: non-finite parameter gradient");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto& w = params.values();
  for (const auto& slot : params.slots()) {
    const bool decay = slot.role == ParamRole::kWeight || slot.role == ParamRole::kEmbedding;
    for (std::size_t i = slot.offset; i < slot.offset + slot.size; ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double update = (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
      w[i] -= lr * (update + (decay ? cfg_.weight_decay * w[i] : 0.0));
    }
  }
}

}  // namespace upat
