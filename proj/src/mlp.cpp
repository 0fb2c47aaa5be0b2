// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/mlp.hpp"

#include <random>

#include "upat/errors.hpp"
#include "upat/nn_ops.hpp"

namespace upat {

using nn::Vec;

void MlpConfig::validate() const {
  if (input.size() == 0) throw ConfigError("mlp: input dimensions must be positive");
  if (hidden < 1 || num_classes < 2) throw ConfigError("mlp: invalid hidden width or num_classes");
  for (int i : masked_inputs) {
    if (i < 0 || static_cast<std::size_t>(i) >= input.size()) {
      throw ConfigError("mlp: masked input index out of range");
    }
  }
}

nlohmann::json to_json(const MlpConfig& c) {
  return {{"kind", "mlp"},
          {"image_height", c.input.height},
          {"image_width", c.input.width},
          {"channels", c.input.channels},
          {"hidden", c.hidden},
          {"num_classes", c.num_classes},
          {"init_std", c.init_std},
          {"masked_inputs", c.masked_inputs}};
}

MlpConfig mlp_config_from_json(const nlohmann::json& j) {
  MlpConfig c;
  c.input = {j.at("image_height").get<int>(), j.at("image_width").get<int>(), j.at("channels").get<int>()};
  c.hidden = j.at("hidden").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.init_std = j.at("init_std").get<double>();
  if (j.contains("masked_inputs")) c.masked_inputs = j.at("masked_inputs").get<std::vector<int>>();
  return c;
}

Mlp::Mlp(MlpConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const int in = static_cast<int>(config_.input.size());
  params_.add("fc1.weight", {config_.hidden, in}, ParamRole::kWeight);
  params_.add("fc1.bias", {config_.hidden}, ParamRole::kBias);
  params_.add("head.weight", {config_.num_classes, config_.hidden}, ParamRole::kWeight);
  params_.add("head.bias", {config_.num_classes}, ParamRole::kBias);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, config_.init_std);
  for (const auto& s : params_.slots()) {
    if (s.role != ParamRole::kWeight) continue;
    for (double& x : params_.view(s)) x = normal(rng);
  }
  mask_.assign(in, 1.0);
  for (int i : config_.masked_inputs) mask_[i] = 0.0;
}

double Mlp::run_sample(const SampleIO& io) const {
  const int in = static_cast<int>(config_.input.size());
  const int hid = config_.hidden;
  const int k = config_.num_classes;
  const auto& ps = params_;
  const double* w = ps.values().data();
  const nn::ConstMatMap w1(w + ps.slot("fc1.weight").offset, hid, in);
  const nn::ConstVecMap b1(w + ps.slot("fc1.bias").offset, hid);
  const nn::ConstMatMap w2(w + ps.slot("head.weight").offset, k, hid);
  const nn::ConstVecMap b2(w + ps.slot("head.bias").offset, k);

  const Vec x = nn::ConstVecMap(io.image.data(), in).cwiseProduct(nn::ConstVecMap(mask_.data(), in));
  const Vec h = w1 * x + b1;
  const Vec g = h.unaryExpr([](double v) { return nn::gelu(v); });
  if (!g.allFinite()) throw NumericError("mlp: non-finite activations in fc1");
  const Vec logits = w2 * g + b2;
  if (!logits.allFinite()) throw NumericError("mlp: non-finite activations in head");
  for (int i = 0; i < k; ++i) io.logits[i] = logits(i);

  Vec dlogits = Vec::Zero(k);
  const bool backward = io.request.any();
  const double loss = cross_entropy(io.logits, io.label, io.weight,
                                    backward ? std::span<double>(dlogits.data(), k) : std::span<double>{});
  if (!backward) return loss;

  const Vec dh = (w2.transpose() * dlogits).cwiseProduct(h.unaryExpr([](double v) { return nn::gelu_grad(v); }));
  if (io.request.parameters) {
    double* gw = io.param_grad.data();
    nn::MatMap(gw + ps.slot("head.weight").offset, k, hid).noalias() += dlogits * g.transpose();
    nn::VecMap(gw + ps.slot("head.bias").offset, k) += dlogits;
    nn::MatMap(gw + ps.slot("fc1.weight").offset, hid, in).noalias() += dh * x.transpose();
    nn::VecMap(gw + ps.slot("fc1.bias").offset, hid) += dh;
  }
  if (io.request.inputs) {
    nn::VecMap(io.input_grad.data(), in) =
        (w1.transpose() * dh).cwiseProduct(nn::ConstVecMap(mask_.data(), in));
  }
  return loss;
}

}  // namespace upat
