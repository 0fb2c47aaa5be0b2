// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// upat train|ablate|analyze|ingest
//
// Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "upat/config.hpp"
#include "upat/errors.hpp"
#include "upat/run.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> extra;

  upat::ExperimentConfig load() const {
    std::vector<std::pair<std::string, std::string>> overrides = extra;
    for (const auto& s : sets) overrides.push_back(upat::split_override(s));
    return path.empty() ? upat::parse_config("", overrides) : upat::load_config(path, overrides);
  }
};

void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("-c,--config", args.path, "YAML experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--set", args.sets, "Override a config value, e.g. train.epochs=2 (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Universal pyramid adversarial training"};
  app.require_subcommand(1);

  ConfigArgs train_cfg, ablate_cfg, ingest_cfg;
  std::optional<std::string> method, radius, schedule, out_dir;
  std::optional<int> steps, epochs;
  std::optional<std::uint64_t> seed;
  int stop_after = -1;
  auto* train = app.add_subcommand("train", "Train one model");
  add_config_flags(train, train_cfg);
  train->add_option("--method", method, "baseline | pat | upat | upat_flat | upat_no_clean");
  train->add_option("--radius", radius, "Adversary radius, e.g. 8/255");
  train->add_option("--schedule", schedule, "Radius schedule on|off");
  train->add_option("--steps", steps, "Attack steps for pat");
  train->add_option("--epochs", epochs, "Training epochs");
  train->add_option("--seed", seed, "Training seed");
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--stop-after", stop_after, "Stop after this many epochs (resume later)");

  std::optional<std::string> ablate_out;
  auto* ablate = app.add_subcommand("ablate", "Run the method and radius ablation grid");
  add_config_flags(ablate, ablate_cfg);
  ablate->add_option("--out", ablate_out, "Output directory");

  upat::AnalyzeOptions aopts;
  std::string checkpoint;
  std::optional<int> grid;
  std::optional<double> span;
  std::optional<std::string> attack_radius;
  auto* analyze = app.add_subcommand("analyze", "Analyze a checkpoint");
  analyze->add_option("checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--mode", aopts.mode, "strength | landscape | viz | corruption | cost")
      ->required()
      ->check(CLI::IsMember(upat::analyze_modes()));
  analyze->add_option("--adversary", aopts.adversary, "strength: auto | universal | samplewise")
      ->check(CLI::IsMember({"auto", "universal", "samplewise"}));
  analyze->add_option("--grid", grid, "Landscape grid size (odd)");
  analyze->add_option("--span", span, "Landscape span");
  analyze->add_option("--radius", attack_radius, "Sample-wise attack radius, e.g. 6/255");
  analyze->add_option("--seed", aopts.seed, "Seed for random directions and attacks");
  analyze->add_option("--out", aopts.out_dir, "Output directory");

  auto* ingest = app.add_subcommand("ingest", "Load and split a dataset, print a summary");
  add_config_flags(ingest, ingest_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      if (method) train_cfg.extra.push_back({"train.method", *method});
      if (radius) {
        train_cfg.extra.push_back({"train.attack.radius", *radius});
        train_cfg.extra.push_back({"train.universal.radius", *radius});
      }
      if (schedule) train_cfg.extra.push_back({"train.schedule.enabled", *schedule});
      if (steps) train_cfg.extra.push_back({"train.attack.steps", std::to_string(*steps)});
      if (epochs) train_cfg.extra.push_back({"train.epochs", std::to_string(*epochs)});
      if (seed) train_cfg.extra.push_back({"train.seed", std::to_string(*seed)});
      if (out_dir) train_cfg.extra.push_back({"output_dir", *out_dir});
      const upat::ExperimentConfig cfg = train_cfg.load();
      upat::TrainOptions opts;
      opts.stop_after = stop_after;
      opts.log = &std::cerr;
      const auto r = upat::cmd_train(cfg, opts);
      if (r.complete) std::cout << r.summary.dump(2) << "\n";
      std::cout << "run directory: " << r.dir.string() << "\n";
    } else if (*ablate) {
      if (ablate_out) ablate_cfg.extra.push_back({"output_dir", *ablate_out});
      const auto r = upat::cmd_ablate(ablate_cfg.load(), &std::cerr);
      std::cout << upat::ablation_table(r.rows) << "results: " << (r.dir / "results.csv").string() << "\n";
    } else if (*analyze) {
      aopts.grid = grid;
      aopts.span = span;
      if (attack_radius) aopts.radius = upat::parse_real(*attack_radius);
      upat::cmd_analyze(checkpoint, aopts, std::cout);
    } else if (*ingest) {
      upat::cmd_ingest(ingest_cfg.load(), std::cout);
    }
  } catch (const upat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const upat::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const upat::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
