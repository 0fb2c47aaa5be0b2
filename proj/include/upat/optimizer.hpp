// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "upat/parameters.hpp"

namespace upat {

struct OptimizerConfig {
  double lr = 1e-3;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int warmup_epochs = 1;

  bool operator==(const OptimizerConfig&) const = default;
};

// Linear warmup to `lr`, then cosine decay to zero at the last step.
double learning_rate(const OptimizerConfig& cfg, std::int64_t step, std::int64_t steps_per_epoch, int epochs);

// Adam with decoupled weight decay. Decay applies to weight matrices and
// embeddings; biases and norm parameters are not decayed.
class AdamW {
 public:
  AdamW() = default;
  AdamW(OptimizerConfig cfg, std::size_t num_params);

  void step(ParameterSet& params, std::span<const double> grad, double lr);

  const OptimizerConfig& config() const { return cfg_; }
  std::int64_t steps_taken() const { return t_; }
  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void set_steps_taken(std::int64_t t) { t_ = t; }

  bool operator==(const AdamW&) const = default;

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

}  // namespace upat
