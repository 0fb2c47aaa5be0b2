// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small models and data shared by the unit and acceptance tests.

#pragma once

#include <memory>
#include <random>
#include <vector>

#include "support/oracles.hpp"
#include "upat/config.hpp"
#include "upat/model.hpp"
#include "upat/tiny_vit.hpp"

namespace upat::testing {

// Two-class probe with logits (theta * (x0 + 2 x1), 0) on a 1x2x1 image.
class LinearProbe final : public Classifier {
 public:
  explicit LinearProbe(double theta) {
    params_.add("theta", {1}, ParamRole::kWeight);
    params_.values()[0] = theta;
  }
  std::string kind() const override { return "linear_probe"; }
  ImageShape input_shape() const override { return {1, 2, 1}; }
  int num_classes() const override { return 2; }
  nlohmann::json architecture() const override { return {{"kind", kind()}}; }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<LinearProbe>(*this); }

 protected:
  double run_sample(const SampleIO& io) const override {
    const double theta = params_.values()[0];
    const double s = io.image[0] + 2.0 * io.image[1];
    io.logits[0] = theta * s;
    io.logits[1] = 0.0;
    double d[2] = {0.0, 0.0};
    const double ce = cross_entropy(io.logits, io.label, io.weight, d);
    if (io.request.parameters) io.param_grad[0] += d[0] * s;
    if (io.request.inputs) {
      io.input_grad[0] = d[0] * theta;
      io.input_grad[1] = d[0] * 2.0 * theta;
    }
    return ce;
  }
};

// Two-class probe whose first logit is a fixed quadratic form of the pixels.
class QuadraticProbe final : public Classifier {
 public:
  QuadraticProbe(ImageShape shape, std::uint64_t seed) : shape_(shape) {
    params_.add("q", {static_cast<int>(shape.size())}, ParamRole::kWeight);
    center_.resize(shape.size());
    std::mt19937_64 rng(seed);
    fill_uniform(params_.values(), rng, 0.5, 2.0);
    fill_uniform(center_, rng, 0.2, 0.8);
  }
  std::string kind() const override { return "quadratic_probe"; }
  ImageShape input_shape() const override { return shape_; }
  int num_classes() const override { return 2; }
  nlohmann::json architecture() const override { return {{"kind", kind()}}; }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<QuadraticProbe>(*this); }

 protected:
  double run_sample(const SampleIO& io) const override {
    const auto& q = params_.values();
    double z = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) z += q[i] * (io.image[i] - center_[i]) * (io.image[i] - center_[i]);
    io.logits[0] = z;
    io.logits[1] = 0.0;
    double d[2] = {0.0, 0.0};
    const double ce = cross_entropy(io.logits, io.label, io.weight, d);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double u = io.image[i] - center_[i];
      if (io.request.parameters) io.param_grad[i] += d[0] * u * u;
      if (io.request.inputs) io.input_grad[i] = d[0] * 2.0 * q[i] * u;
    }
    return ce;
  }

 private:
  ImageShape shape_;
  std::vector<double> center_;
};

inline TinyVitConfig tiny_vit_config(ImageShape input = {8, 8, 3}, int classes = 4) {
  TinyVitConfig c;
  c.input = input;
  c.patch_size = 4;
  c.embed_dim = 8;
  c.depth = 1;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  c.num_classes = classes;
  c.init_std = 0.3;
  return c;
}

inline ImageBatch random_batch(std::mt19937_64& rng, std::size_t n, ImageShape shape, double lo = 0.1,
                               double hi = 0.9) {
  ImageBatch b(n, shape);
  fill_uniform(b.pixels(), rng, lo, hi);
  return b;
}

inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int k) {
  std::uniform_int_distribution<int> u(0, k - 1);
  std::vector<int> y(n);
  for (int& v : y) v = u(rng);
  return y;
}

// A fast end-to-end experiment: 96 synthetic 8x8 images, one-block ViT.
inline ExperimentConfig small_experiment(const std::string& out_dir) {
  ExperimentConfig c;
  c.output_dir = out_dir;
  c.dataset.num_samples = 96;
  c.dataset.image_size = 8;
  c.dataset.num_classes = 4;
  c.model.patch_size = 4;
  c.model.embed_dim = 8;
  c.model.depth = 1;
  c.model.num_heads = 2;
  c.train.epochs = 3;
  c.train.batch_size = 16;
  c.train.augment.crop_padding = 1;
  c.train.attack.spec.scales = {4, 2, 1};
  c.train.attack.num_steps = 2;
  c.train.attack.spec.step_size = c.train.attack.spec.radius / 2.0;
  c.train.universal.spec.scales = {4, 2, 1};
  c.train.schedule.e_start = 1;
  c.eval.landscape_grid = 3;
  c.eval.landscape_samples = 8;
  return c;
}

}  // namespace upat::testing
