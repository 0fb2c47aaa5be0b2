// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable image classifiers. Every model computes, per sample, the
// cross-entropy of its logits and can return gradients with respect to both
// its parameters and its inputs from one backward pass.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "upat/image.hpp"
#include "upat/parameters.hpp"

namespace upat {

struct GradientRequest {
  bool parameters = false;
  bool inputs = false;
  bool any() const { return parameters || inputs; }
};

struct PassResult {
  double loss = 0.0;                    // sum_i w_i * CE_i
  std::vector<double> logits;           // count x num_classes, row-major
  std::vector<double> per_sample_loss;  // CE_i
  std::vector<double> param_grad;       // d loss / d theta, when requested
  std::vector<double> input_grad;       // d loss / d x (NHWC), when requested

  // Number of rows of `logits` whose argmax equals the label.
  std::size_t correct(std::span<const int> labels, int num_classes) const;
};

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string kind() const = 0;
  virtual ImageShape input_shape() const = 0;
  virtual int num_classes() const = 0;
  virtual nlohmann::json architecture() const = 0;
  virtual std::unique_ptr<Classifier> clone() const = 0;

  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  // Weighted cross-entropy pass. `weights` must have one entry per image.
  PassResult run(const ImageBatch& images, std::span<const int> labels,
                 std::span<const double> weights, GradientRequest request) const;

 protected:
  struct SampleIO {
    std::span<const double> image;
    int label = 0;
    double weight = 0.0;
    GradientRequest request;
    std::span<double> logits;      // out
    std::span<double> param_grad;  // accumulated into, may be empty
    std::span<double> input_grad;  // overwritten, may be empty
  };
  // Returns the sample's cross-entropy.
  virtual double run_sample(const SampleIO& io) const = 0;

  ParameterSet params_;
};

// Mean cross-entropy over the batch plus logits.
PassResult forward_loss(const Classifier& model, const ImageBatch& images, std::span<const int> labels);

// Gradient of the mean cross-entropy w.r.t. the input pixels.
std::vector<double> input_gradient(const Classifier& model, const ImageBatch& images,
                                   std::span<const int> labels);

// Numerically stable cross-entropy. Writes weight * (softmax - onehot) into
// `dlogits` when it is non-empty.
double cross_entropy(std::span<const double> logits, int label, double weight, std::span<double> dlogits);

// Builds a model from an architecture record; `seed` drives initialization.
std::unique_ptr<Classifier> make_classifier(const nlohmann::json& architecture, std::uint64_t seed);

// Order-sensitive FNV-1a hash of the parameter bytes.
std::uint64_t parameter_hash(const Classifier& model);

}  // namespace upat
