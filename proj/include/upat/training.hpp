// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training loops: clean baseline, sample-wise pyramid adversarial training,
// and universal pyramid adversarial training with free perturbation
// gradients. Every step charges its model passes to a CostLedger.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "upat/adversary.hpp"
#include "upat/cost.hpp"
#include "upat/dataset.hpp"
#include "upat/method.hpp"
#include "upat/model.hpp"
#include "upat/optimizer.hpp"

namespace upat {

struct ScheduleConfig {
  bool enabled = false;
  double end_ratio = 0.1;  // r_end = end_ratio * r_start
  int e_start = 3;
  int e_end = 0;  // 0 means "the last epoch"
  bool operator==(const ScheduleConfig&) const = default;
};

struct UniversalConfig {
  PyramidSpec spec{.scales = {32, 16, 1}, .multipliers = {20.0, 10.0, 1.0}, .radius = 8.0 / 255.0,
                   .step_size = 8.0 / 255.0 / 10.0, .per_channel = true};
  StepSize step = StepSize::radius_over(10.0);
  bool operator==(const UniversalConfig&) const = default;
};

struct TrainConfig {
  Method method = Method::kUpat;
  double lambda = 1.0;
  int epochs = 30;
  int batch_size = 64;
  OptimizerConfig optimizer;
  AugmentConfig augment;
  AttackConfig attack;        // sample-wise adversary (pat)
  UniversalConfig universal;  // shared adversary (upat variants)
  ScheduleConfig schedule;
  std::uint64_t seed = 0;
  bool eval_adversarial = true;  // per-epoch attack strength on the val split

  void validate() const;  // throws ConfigError
  // Pyramid used by the universal adversary; upat_flat collapses it to S=[1], M=[1].
  PyramidSpec universal_spec() const;
  // Unscheduled radius of the method's adversary (0 for baseline).
  double base_radius() const;
  RadiusSchedule radius_schedule() const;
  bool operator==(const TrainConfig&) const = default;
};

struct StepMetrics {
  double loss = 0.0;
  double clean_loss = std::numeric_limits<double>::quiet_NaN();
  double adv_loss = std::numeric_limits<double>::quiet_NaN();
  std::size_t clean_correct = 0;
  std::size_t adv_correct = 0;
  std::size_t count = 0;
};

// Extra outputs of a universal step, used to verify the free gradients.
struct UpatStepTrace {
  std::vector<LevelGrid> level_grads;  // harvested from the training backward pass
  std::vector<double> param_grad;
  ImageBatch perturbed;
};

StepMetrics train_step_baseline(Classifier& model, const ImageBatch& images, std::span<const int> labels,
                                AdamW& opt, double lr, CostLedger& ledger);

StepMetrics train_step_pat(Classifier& model, const ImageBatch& images, std::span<const int> labels, AdamW& opt,
                           double lr, const AttackConfig& attack, double lambda, double radius,
                           CostLedger& ledger, std::mt19937_64& rng);

// One Algorithm-1 step: materialize, combined loss, parameter update, then the
// sign-ascent update of the shared perturbation with the same backward's
// gradients. `include_clean = false` trains on the perturbed batch only.
StepMetrics train_step_upat(Classifier& model, const ImageBatch& images, std::span<const int> labels,
                            PyramidPerturbation& universal, AdamW& opt, double lr, double lambda,
                            bool include_clean, const RadiusSchedule& schedule, int epoch, double step,
                            CostLedger& ledger, UpatStepTrace* trace = nullptr);

struct EpochRecord {
  int epoch = 0;
  std::string method;
  double radius = 0.0;
  double lr = 0.0;
  double train_loss = 0.0;
  double clean_loss = std::numeric_limits<double>::quiet_NaN();
  double adv_loss = std::numeric_limits<double>::quiet_NaN();
  double train_clean_acc = std::numeric_limits<double>::quiet_NaN();
  double train_adv_acc = std::numeric_limits<double>::quiet_NaN();
  double val_clean_acc = 0.0;
  double val_loss = 0.0;
  double adv_err_increase = std::numeric_limits<double>::quiet_NaN();  // val split
  double cumulative_units = 0.0;

  bool operator==(const EpochRecord& o) const;  // NaN fields compare equal to NaN
};

inline constexpr int kMetricsSchemaVersion = 1;
nlohmann::json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

struct TrainingState {
  std::unique_ptr<Classifier> model;
  AdamW optimizer;
  std::optional<PyramidPerturbation> universal;
  std::mt19937_64 rng;
  int next_epoch = 0;
  std::int64_t global_step = 0;
  CostLedger ledger;
  std::vector<EpochRecord> history;
};

TrainingState init_training(const TrainConfig& cfg, const nlohmann::json& architecture, ImageShape input_shape);

using EpochCallback = std::function<void(const EpochRecord&, const TrainingState&)>;

// Trains from state.next_epoch up to cfg.epochs (or `stop_after` epochs in
// total when non-negative). Step failures are rethrown with epoch/step context.
void run_training(TrainingState& state, const TrainConfig& cfg, const DatasetSplits& data,
                  const EpochCallback& on_epoch = {}, int stop_after = -1);

struct TrainingResult {
  TrainingState state;
  PassCostReport cost;
};

TrainingResult run_training(const TrainConfig& cfg, const nlohmann::json& architecture, const DatasetSplits& data);

std::size_t steps_per_epoch(std::size_t n_train, int batch_size);

}  // namespace upat
