// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "upat/errors.hpp"
#include "upat/mlp.hpp"
#include "upat/tiny_vit.hpp"

namespace upat {

std::size_t PassResult::correct(std::span<const int> labels, int num_classes) const {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* row = logits.data() + i * num_classes;
    const auto best = std::max_element(row, row + num_classes) - row;
    if (best == labels[i]) ++hits;
  }
  return hits;
}

double cross_entropy(std::span<const double> logits, int label, double weight, std::span<double> dlogits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double z : logits) denom += std::exp(z - mx);
  const double log_denom = std::log(denom);
  const double loss = log_denom + mx - logits[label];
  if (!dlogits.empty()) {
    for (std::size_t k = 0; k < logits.size(); ++k) {
      const double p = std::exp(logits[k] - mx - log_denom);
      dlogits[k] = weight * (p - (static_cast<int>(k) == label ? 1.0 : 0.0));
    }
  }
  return loss;
}

PassResult Classifier::run(const ImageBatch& images, std::span<const int> labels,
                           std::span<const double> weights, GradientRequest request) const {
  const std::size_t n = images.count();
  if (labels.size() != n || weights.size() != n) {
    throw std::invalid_argument(kind() + ": labels/weights do not match batch size");
  }
  if (!(images.shape() == input_shape())) {
    throw std::invalid_argument(kind() + ": image shape does not match model input shape");
  }
  const int k = num_classes();
  for (int y : labels) {
    if (y < 0 || y >= k) throw std::invalid_argument(kind() + ": label out of range");
  }
  for (double v : images.pixels()) {
    if (!std::isfinite(v)) throw NumericError(kind() + ": non-finite input pixel");
    if (v < 0.0 || v > 1.0) throw std::invalid_argument(kind() + ": input pixel outside [0, 1]");
  }

  PassResult out;
  out.logits.assign(n * k, 0.0);
  out.per_sample_loss.assign(n, 0.0);
  if (request.parameters) out.param_grad.assign(params_.size(), 0.0);
  if (request.inputs) out.input_grad.assign(images.pixels().size(), 0.0);

  const std::size_t isz = images.shape().size();
  for (std::size_t i = 0; i < n; ++i) {
    SampleIO io;
    io.image = images.image(i);
    io.label = labels[i];
    io.weight = weights[i];
    io.request = request;
    io.logits = std::span<double>(out.logits.data() + i * k, k);
    if (request.parameters) io.param_grad = out.param_grad;
    if (request.inputs) io.input_grad = std::span<double>(out.input_grad.data() + i * isz, isz);
    const double ce = run_sample(io);
    if (!std::isfinite(ce)) throw NumericError(kind() + ": non-finite loss");
    out.per_sample_loss[i] = ce;
    out.loss += weights[i] * ce;
  }
  return out;
}

PassResult forward_loss(const Classifier& model, const ImageBatch& images, std::span<const int> labels) {
  if (images.empty()) throw std::invalid_argument("forward_loss: empty batch");
  std::vector<double> w(images.count(), 1.0 / static_cast<double>(images.count()));
  return model.run(images, labels, w, {});
}

std::vector<double> input_gradient(const Classifier& model, const ImageBatch& images,
                                   std::span<const int> labels) {
  if (images.empty()) throw std::invalid_argument("input_gradient: empty batch");
  std::vector<double> w(images.count(), 1.0 / static_cast<double>(images.count()));
  return model.run(images, labels, w, {.parameters = false, .inputs = true}).input_grad;
}

std::unique_ptr<Classifier> make_classifier(const nlohmann::json& architecture, std::uint64_t seed) {
  const std::string kind = architecture.at("kind").get<std::string>();
  if (kind == "tiny_vit") return std::make_unique<TinyViT>(tiny_vit_config_from_json(architecture), seed);
  if (kind == "mlp") return std::make_unique<Mlp>(mlp_config_from_json(architecture), seed);
  throw ConfigError("unknown model kind '" + kind + "' (expected tiny_vit or mlp)");
}

std::uint64_t parameter_hash(const Classifier& model) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : model.parameters().values()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace upat
