// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Measurement instruments. None of these mutate the model or the
// perturbation they are handed.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "upat/adversary.hpp"
#include "upat/dataset.hpp"
#include "upat/model.hpp"
#include "upat/pyramid.hpp"
#include "upat/raster.hpp"

namespace upat {

struct AccuracyResult {
  double accuracy = 0.0;
  double loss = 0.0;  // mean cross-entropy
  std::size_t count = 0;
};

AccuracyResult evaluate_accuracy(const Classifier& model, const LabeledImages& data, int batch_size = 256);

struct UniversalAdversary {
  const PyramidPerturbation* state = nullptr;
  double radius = 0.0;
};

struct SamplewiseAdversary {
  AttackConfig attack;
  double radius = 0.0;
  std::uint64_t seed = 0;
};

using AdversaryMode = std::variant<UniversalAdversary, SamplewiseAdversary>;

struct StrengthResult {
  double clean_error = 0.0;
  double adv_error = 0.0;
  double increase = 0.0;  // adv_error - clean_error, absolute
};

StrengthResult attack_strength(const Classifier& model, const LabeledImages& data, const AdversaryMode& mode,
                               int batch_size = 128);

// Desk-scale corruption proxies. Severity 0 is the identity for every kind.
inline constexpr int kMaxSeverity = 3;
const std::vector<std::string>& corruption_names();  // identity, gaussian_noise, blur, contrast, pixelate
ImageBatch corrupt(const ImageBatch& images, std::string_view name, int severity, std::uint64_t seed);

using CorruptionAccuracies = std::map<std::string, std::map<int, double>>;

// Accuracy for every (corruption, severity in 0..max_severity). Accuracy that
// rises with severity for gaussian_noise is reported in `warnings`, not thrown.
CorruptionAccuracies corruption_eval(const Classifier& model, const LabeledImages& data,
                                     std::span<const std::string> corruptions, std::uint64_t seed = 0,
                                     int max_severity = kMaxSeverity, std::vector<std::string>* warnings = nullptr);

// Random Gaussian direction rescaled row by row to the norm of the matching
// weight row. Biases and norm parameters get a zero direction, as do rows
// whose weights are all zero.
std::vector<double> filter_normalized_direction(const ParameterSet& params, std::mt19937_64& rng);

struct LandscapeGrid {
  int n = 0;
  double span = 0.0;
  std::vector<double> alphas;  // n values in [-span, span]
  std::vector<double> loss;    // n x n, row = alpha1 index, col = alpha2 index
  double at(int i, int j) const { return loss[static_cast<std::size_t>(i) * n + j]; }
};

LandscapeGrid loss_landscape(const Classifier& model, const LabeledImages& sample, int grid_n, double span,
                             std::uint64_t seed);

// Each value mapped linearly so min -> 0 and max -> 1; a constant input maps to 0.5.
std::vector<double> normalize_min_max(std::span<const double> values);

struct PyramidImages {
  std::vector<int> scales;
  std::vector<Raster> levels;  // one per scale, full resolution
  Raster composite;
};

PyramidImages export_pyramid_images(const PyramidPerturbation& p, double radius);

Raster landscape_heatmap(const LandscapeGrid& grid);

struct EvalReport {
  double clean_acc = 0.0;
  double adv_error_increase_train = 0.0;
  double adv_error_increase_val = 0.0;
  CorruptionAccuracies corruption_accs;
  LandscapeGrid landscape;
};

nlohmann::json to_json(const EvalReport& r);

}  // namespace upat
