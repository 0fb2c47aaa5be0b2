// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/cost.hpp"

#include <stdexcept>

#include "upat/errors.hpp"

namespace upat {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kBaseline: return "baseline";
    case Method::kPat: return "pat";
    case Method::kUpat: return "upat";
    case Method::kUpatFlat: return "upat_flat";
    case Method::kUpatNoClean: return "upat_no_clean";
  }
  return "baseline";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kBaseline, Method::kPat, Method::kUpat, Method::kUpatFlat, Method::kUpatNoClean}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected baseline, pat, upat, upat_flat or upat_no_clean)");
}

void CostLedger::record(PassPurpose purpose, std::size_t samples, std::size_t base_batch, bool backward) {
  if (base_batch == 0 || samples % base_batch != 0) {
    throw std::invalid_argument("CostLedger: pass size must be a multiple of the base batch");
  }
  const auto halves = static_cast<std::int64_t>(samples / base_batch);
  if (purpose == PassPurpose::kGeneration) {
    generation_half_ += halves * (backward ? 2 : 1);
  } else {
    train_forward_half_ += halves;
    if (backward) train_backward_half_ += halves;
  }
}

CostLedger CostLedger::operator-(const CostLedger& earlier) const {
  CostLedger d;
  d.generation_half_ = generation_half_ - earlier.generation_half_;
  d.train_forward_half_ = train_forward_half_ - earlier.train_forward_half_;
  d.train_backward_half_ = train_backward_half_ - earlier.train_backward_half_;
  return d;
}

PassCostReport pass_cost_report(Method method, int attack_steps) {
  CostLedger l;
  constexpr std::size_t b = 1;
  switch (method) {
    case Method::kBaseline:
      l.record(PassPurpose::kTraining, b, b, true);
      break;
    case Method::kPat:
      if (attack_steps < 1) throw std::invalid_argument("pass_cost_report: PAT needs at least one step");
      for (int k = 0; k < attack_steps; ++k) l.record(PassPurpose::kGeneration, b, b, true);
      l.record(PassPurpose::kTraining, 2 * b, b, true);
      break;
    case Method::kUpat:
    case Method::kUpatFlat:
      l.record(PassPurpose::kTraining, 2 * b, b, true);
      break;
    case Method::kUpatNoClean:
      l.record(PassPurpose::kTraining, b, b, true);
      break;
  }
  return report_from_ledger(method, method == Method::kPat ? attack_steps : 0, l);
}

PassCostReport report_from_ledger(Method method, int attack_steps, const CostLedger& ledger, int steps) {
  if (steps < 1) throw std::invalid_argument("report_from_ledger: steps must be positive");
  PassCostReport r;
  r.method = std::string(method_name(method));
  r.attack_steps = attack_steps;
  const double s = steps;
  r.gen_passes_per_step = ledger.generation_half_units() / 2.0 / s;
  r.train_forward_units = ledger.training_forward_half_units() / 2.0 / s;
  r.train_backward_units = ledger.training_backward_half_units() / 2.0 / s;
  r.total_units_per_step = ledger.total_units() / s;
  r.relative_cost = r.total_units_per_step / 1.0;
  return r;
}

double cost_savings(const PassCostReport& ours, const PassCostReport& other) {
  return (other.total_units_per_step - ours.total_units_per_step) / other.total_units_per_step;
}

std::vector<PassCostReport> cost_table(int max_steps) {
  std::vector<PassCostReport> t;
  t.push_back(pass_cost_report(Method::kBaseline));
  for (int k = 1; k <= max_steps; ++k) t.push_back(pass_cost_report(Method::kPat, k));
  t.push_back(pass_cost_report(Method::kUpat));
  t.push_back(pass_cost_report(Method::kUpatFlat));
  t.push_back(pass_cost_report(Method::kUpatNoClean));
  return t;
}

}  // namespace upat
