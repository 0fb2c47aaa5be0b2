// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "upat/model.hpp"

namespace upat {

struct MlpConfig {
  ImageShape input{32, 32, 3};
  int hidden = 128;
  int num_classes = 10;
  double init_std = 0.02;
  // Flat HWC pixel indices that are multiplied by zero before the first layer.
  std::vector<int> masked_inputs;

  void validate() const;
  bool operator==(const MlpConfig&) const = default;
};

nlohmann::json to_json(const MlpConfig& c);
MlpConfig mlp_config_from_json(const nlohmann::json& j);

// flatten -> linear -> GELU -> linear.
class Mlp final : public Classifier {
 public:
  Mlp(MlpConfig config, std::uint64_t seed);

  std::string kind() const override { return "mlp"; }
  ImageShape input_shape() const override { return config_.input; }
  int num_classes() const override { return config_.num_classes; }
  nlohmann::json architecture() const override { return to_json(config_); }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<Mlp>(*this); }

 protected:
  double run_sample(const SampleIO& io) const override;

 private:
  MlpConfig config_;
  std::vector<double> mask_;  // 1 keeps a pixel, 0 drops it
};

}  // namespace upat
