// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Compute accounting. One unit is a forward plus a backward pass over the
// step's base batch. Forward and backward halves are tracked separately as
// integer half-units so every total is exact.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "upat/method.hpp"

namespace upat {

enum class PassPurpose { kGeneration, kTraining };

class CostLedger {
 public:
  // Records a pass over `samples` images, which must be a multiple of
  // `base_batch`. A backward pass always implies its forward pass.
  void record(PassPurpose purpose, std::size_t samples, std::size_t base_batch, bool backward);

  std::int64_t generation_half_units() const { return generation_half_; }
  std::int64_t training_forward_half_units() const { return train_forward_half_; }
  std::int64_t training_backward_half_units() const { return train_backward_half_; }
  std::int64_t total_half_units() const { return generation_half_ + train_forward_half_ + train_backward_half_; }
  double total_units() const { return static_cast<double>(total_half_units()) / 2.0; }

  CostLedger operator-(const CostLedger& earlier) const;
  bool operator==(const CostLedger&) const = default;

  std::int64_t generation_half_ = 0;
  std::int64_t train_forward_half_ = 0;
  std::int64_t train_backward_half_ = 0;
};

struct PassCostReport {
  std::string method;
  int attack_steps = 0;
  double gen_passes_per_step = 0.0;
  double train_forward_units = 0.0;
  double train_backward_units = 0.0;
  double total_units_per_step = 0.0;
  double relative_cost = 0.0;  // vs. the baseline's single unit

  bool operator==(const PassCostReport&) const = default;
};

// Per-step cost of a method from its pass structure.
PassCostReport pass_cost_report(Method method, int attack_steps = 0);

// The same report read off a ledger that covers exactly `steps` steps.
PassCostReport report_from_ledger(Method method, int attack_steps, const CostLedger& ledger, int steps = 1);

// Fraction of compute saved by `ours` relative to `other`: (other - ours) / other.
double cost_savings(const PassCostReport& ours, const PassCostReport& other);

// Baseline, PAT with 1..max_steps steps, and every universal variant.
std::vector<PassCostReport> cost_table(int max_steps = 5);

}  // namespace upat
