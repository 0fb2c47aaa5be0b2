// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Subcommand implementations behind the command-line tool. Each takes a
// validated ExperimentConfig (or a checkpoint) and writes into a run directory:
//
//   <output_dir>/<run name>/config.yaml      exact config snapshot
//                           metrics.jsonl    one EpochRecord per line
//                           checkpoint.upat  latest snapshot
//                           summary.json     written once training completes
//                           analysis/        analyze outputs

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "upat/config.hpp"
#include "upat/cost.hpp"
#include "upat/training.hpp"

namespace upat {

struct TrainOptions {
  int stop_after = -1;  // stop once this many epochs exist (simulated interruption)
  std::ostream* log = nullptr;
};

struct TrainOutcome {
  std::filesystem::path dir;
  std::vector<EpochRecord> history;
  bool resumed = false;
  bool complete = false;
  nlohmann::json summary;  // null until complete
};

// Resumes from the run directory's checkpoint when one exists. The dataset is
// ingested before anything is written, so a bad dataset leaves no run directory.
TrainOutcome cmd_train(const ExperimentConfig& cfg, const TrainOptions& opts = {});

struct AblationVariant {
  std::string label;
  ExperimentConfig config;  // seed not yet applied
};

std::vector<AblationVariant> ablation_variants(const ExperimentConfig& cfg);

struct AblationRow {
  std::string label;
  std::string method;
  int attack_steps = 0;
  double radius = 0.0;
  std::uint64_t seed = 0;
  int epochs = 0;
  double val_clean_acc = 0.0;
  double val_loss = 0.0;
  double adv_err_increase = 0.0;  // NaN for baseline
  double units_per_step = 0.0;
  double relative_cost = 0.0;
};

inline constexpr const char* kAblationCsvHeader =
    "label,method,attack_steps,radius,seed,epochs,val_clean_acc,val_loss,adv_err_increase,units_per_step,"
    "relative_cost";

struct AblationOutcome {
  std::filesystem::path dir;
  std::vector<AblationRow> rows;
};

// Runs every variant for every seed. Finished runs are skipped on rerun and the
// merged results.csv is rewritten after each run, so an interrupt keeps all
// completed rows.
AblationOutcome cmd_ablate(const ExperimentConfig& cfg, std::ostream* log = nullptr);

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);  // mean/std over seeds per label

struct AnalyzeOptions {
  std::string mode;                // strength | landscape | viz | corruption | cost
  std::string adversary = "auto";  // strength: auto | universal | samplewise
  std::optional<int> grid;         // landscape
  std::optional<double> span;      // landscape
  std::optional<double> radius;    // samplewise attack radius override
  std::uint64_t seed = 0;
  std::string out_dir;  // default: <checkpoint dir>/analysis
};

const std::vector<std::string>& analyze_modes();

nlohmann::json cmd_analyze(const std::string& checkpoint_path, const AnalyzeOptions& opts, std::ostream& out);

nlohmann::json cmd_ingest(const ExperimentConfig& cfg, std::ostream& out);

std::string cost_table_text(const std::vector<PassCostReport>& rows);
std::string cost_table_csv(const std::vector<PassCostReport>& rows);

}  // namespace upat
