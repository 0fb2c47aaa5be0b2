// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration as a YAML tree. Parsing is strict: every unknown
// key and every malformed value is collected and reported in one ConfigError.

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "upat/dataset.hpp"
#include "upat/training.hpp"

namespace upat {

struct ModelConfig {
  std::string kind = "tiny_vit";  // tiny_vit | mlp
  int patch_size = 4;
  int embed_dim = 64;
  int depth = 4;
  int num_heads = 4;
  int mlp_ratio = 2;
  int hidden = 128;  // mlp only
  double init_std = 0.02;
  bool operator==(const ModelConfig&) const = default;
};

struct EvalConfig {
  int landscape_grid = 21;
  double landscape_span = 1.0;
  int landscape_samples = 512;
  std::vector<std::string> corruptions{"identity", "gaussian_noise", "blur", "contrast", "pixelate"};
  int max_severity = 3;
  bool operator==(const EvalConfig&) const = default;
};

struct AblationConfig {
  std::vector<int> pat_steps{1, 2, 3, 4, 5};
  std::vector<double> radii{2.0 / 255, 4.0 / 255, 6.0 / 255, 8.0 / 255, 10.0 / 255, 12.0 / 255};
  std::vector<std::uint64_t> seeds{0};
  bool operator==(const AblationConfig&) const = default;
};

struct ExperimentConfig {
  std::string run_id;  // empty: derived from the config hash and seed
  std::string output_dir = "runs";
  int checkpoint_every = 1;  // epochs; the final epoch is always saved
  DatasetDescriptor dataset;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  AblationConfig ablate;

  void validate() const;  // throws ConfigError
  bool operator==(const ExperimentConfig&) const = default;
};

// Architecture record for make_classifier; image shape and classes come from the dataset.
nlohmann::json architecture_json(const ModelConfig& m, const DatasetDescriptor& d);

// "0.1", "1e-3" and "8/255" are all accepted wherever a real is expected.
double parse_real(std::string_view text);
// Shortest text that parses back to exactly `v`.
std::string format_real(double v);
// Like format_real but prefers "N/255" when that is exact.
std::string format_radius(double v);

ExperimentConfig parse_config(const std::string& yaml_text,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});
std::string serialize_config(const ExperimentConfig& c);

// "a.b.c=value" -> {"a.b.c", "value"}.
std::pair<std::string, std::string> split_override(std::string_view text);

// Hex SHA-256 of the serialized config with output_dir and run_id blanked.
std::string config_hash(const ExperimentConfig& c);
// run_id when set, else "<method>-<first 12 hex of hash>-s<seed>".
std::string run_name(const ExperimentConfig& c);

}  // namespace upat
