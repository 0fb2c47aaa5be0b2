// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "upat/model.hpp"

namespace upat {

struct TinyVitConfig {
  ImageShape input{32, 32, 3};
  int patch_size = 4;
  int embed_dim = 64;
  int depth = 4;
  int num_heads = 4;
  int mlp_ratio = 2;
  int num_classes = 10;
  double init_std = 0.02;

  void validate() const;
  int num_patches() const { return (input.height / patch_size) * (input.width / patch_size); }
  int sequence_length() const { return num_patches() + 1; }  // + class token
  bool operator==(const TinyVitConfig&) const = default;
};

nlohmann::json to_json(const TinyVitConfig& c);
TinyVitConfig tiny_vit_config_from_json(const nlohmann::json& j);

// Pre-norm vision transformer: patch embedding, class token, learned
// positional embeddings, attention + GELU MLP blocks, linear head on the
// class token. No dropout.
class TinyViT final : public Classifier {
 public:
  TinyViT(TinyVitConfig config, std::uint64_t seed);

  std::string kind() const override { return "tiny_vit"; }
  ImageShape input_shape() const override { return config_.input; }
  int num_classes() const override { return config_.num_classes; }
  nlohmann::json architecture() const override { return to_json(config_); }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<TinyViT>(*this); }

  const TinyVitConfig& config() const { return config_; }

 protected:
  double run_sample(const SampleIO& io) const override;

 private:
  TinyVitConfig config_;
};

}  // namespace upat
