// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/tiny_vit.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "upat/errors.hpp"
#include "upat/nn_ops.hpp"

namespace upat {

using nn::Mat;
using nn::Vec;

void TinyVitConfig::validate() const {
  if (input.height < 1 || input.width < 1 || input.channels < 1) {
    throw ConfigError("tiny_vit: input dimensions must be positive");
  }
  if (patch_size < 1 || input.height % patch_size != 0 || input.width % patch_size != 0) {
    throw ConfigError("tiny_vit: patch size must divide the image size");
  }
  if (embed_dim < 1 || num_heads < 1 || embed_dim % num_heads != 0) {
    throw ConfigError("tiny_vit: embed_dim must be a positive multiple of num_heads");
  }
  if (depth < 0 || mlp_ratio < 1 || num_classes < 2) {
    throw ConfigError("tiny_vit: invalid depth, mlp_ratio or num_classes");
  }
}

nlohmann::json to_json(const TinyVitConfig& c) {
  return {{"kind", "tiny_vit"},
          {"image_height", c.input.height},
          {"image_width", c.input.width},
          {"channels", c.input.channels},
          {"patch_size", c.patch_size},
          {"embed_dim", c.embed_dim},
          {"depth", c.depth},
          {"num_heads", c.num_heads},
          {"mlp_ratio", c.mlp_ratio},
          {"num_classes", c.num_classes},
          {"init_std", c.init_std}};
}

TinyVitConfig tiny_vit_config_from_json(const nlohmann::json& j) {
  TinyVitConfig c;
  c.input = {j.at("image_height").get<int>(), j.at("image_width").get<int>(), j.at("channels").get<int>()};
  c.patch_size = j.at("patch_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.depth = j.at("depth").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.init_std = j.at("init_std").get<double>();
  return c;
}

namespace {

struct BlockSlots {
  std::size_t norm1_scale, norm1_shift, qkv_w, qkv_b, proj_w, proj_b;
  std::size_t norm2_scale, norm2_shift, fc1_w, fc1_b, fc2_w, fc2_b;
};

struct Layout {
  std::size_t patch_w, patch_b, cls, pos, norm_scale, norm_shift, head_w, head_b;
  std::vector<BlockSlots> blocks;
};

Layout layout_of(const ParameterSet& p, int depth) {
  Layout l;
  l.patch_w = p.slot("patch_embed.weight").offset;
  l.patch_b = p.slot("patch_embed.bias").offset;
  l.cls = p.slot("cls_token").offset;
  l.pos = p.slot("pos_embed").offset;
  for (int b = 0; b < depth; ++b) {
    const std::string pre = "blocks." + std::to_string(b) + ".";
    l.blocks.push_back({p.slot(pre + "norm1.scale").offset, p.slot(pre + "norm1.shift").offset,
                        p.slot(pre + "attn.qkv.weight").offset, p.slot(pre + "attn.qkv.bias").offset,
                        p.slot(pre + "attn.proj.weight").offset, p.slot(pre + "attn.proj.bias").offset,
                        p.slot(pre + "norm2.scale").offset, p.slot(pre + "norm2.shift").offset,
                        p.slot(pre + "mlp.fc1.weight").offset, p.slot(pre + "mlp.fc1.bias").offset,
                        p.slot(pre + "mlp.fc2.weight").offset, p.slot(pre + "mlp.fc2.bias").offset});
  }
  l.norm_scale = p.slot("norm.scale").offset;
  l.norm_shift = p.slot("norm.shift").offset;
  l.head_w = p.slot("head.weight").offset;
  l.head_b = p.slot("head.bias").offset;
  return l;
}

struct BlockCache {
  Mat z_in;
  nn::LayerNormCache ln1;
  Mat a;
  Mat qkv;
  std::vector<Mat> probs;  // per head, T x T
  Mat o;
  Mat z_mid;
  nn::LayerNormCache ln2;
  Mat b;
  Mat h1;
  Mat g;
};

void check_finite(const Mat& m, int block, const char* what) {
  if (!m.allFinite()) {
    throw NumericError("tiny_vit: non-finite activations in " +
                       (block < 0 ? std::string(what) : "block " + std::to_string(block) + " " + what));
  }
}

}  // namespace

TinyViT::TinyViT(TinyVitConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const int d = config_.embed_dim;
  const int pd = config_.patch_size * config_.patch_size * config_.input.channels;
  const int t = config_.sequence_length();
  const int hidden = d * config_.mlp_ratio;

  params_.add("patch_embed.weight", {d, pd}, ParamRole::kWeight);
  params_.add("patch_embed.bias", {d}, ParamRole::kBias);
  params_.add("cls_token", {1, d}, ParamRole::kEmbedding);
  params_.add("pos_embed", {t, d}, ParamRole::kEmbedding);
  for (int b = 0; b < config_.depth; ++b) {
    const std::string pre = "blocks." + std::to_string(b) + ".";
    params_.add(pre + "norm1.scale", {d}, ParamRole::kNormScale);
    params_.add(pre + "norm1.shift", {d}, ParamRole::kNormShift);
    params_.add(pre + "attn.qkv.weight", {3 * d, d}, ParamRole::kWeight);
    params_.add(pre + "attn.qkv.bias", {3 * d}, ParamRole::kBias);
    params_.add(pre + "attn.proj.weight", {d, d}, ParamRole::kWeight);
    params_.add(pre + "attn.proj.bias", {d}, ParamRole::kBias);
    params_.add(pre + "norm2.scale", {d}, ParamRole::kNormScale);
    params_.add(pre + "norm2.shift", {d}, ParamRole::kNormShift);
    params_.add(pre + "mlp.fc1.weight", {hidden, d}, ParamRole::kWeight);
    params_.add(pre + "mlp.fc1.bias", {hidden}, ParamRole::kBias);
    params_.add(pre + "mlp.fc2.weight", {d, hidden}, ParamRole::kWeight);
    params_.add(pre + "mlp.fc2.bias", {d}, ParamRole::kBias);
  }
  params_.add("norm.scale", {d}, ParamRole::kNormScale);
  params_.add("norm.shift", {d}, ParamRole::kNormShift);
  params_.add("head.weight", {config_.num_classes, d}, ParamRole::kWeight);
  params_.add("head.bias", {config_.num_classes}, ParamRole::kBias);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, config_.init_std);
  for (const auto& s : params_.slots()) {
    auto v = params_.view(s);
    switch (s.role) {
      case ParamRole::kWeight:
      case ParamRole::kEmbedding:
        for (double& x : v) x = normal(rng);
        break;
      case ParamRole::kNormScale:
        std::fill(v.begin(), v.end(), 1.0);
        break;
      default:
        std::fill(v.begin(), v.end(), 0.0);
    }
  }
}

double TinyViT::run_sample(const SampleIO& io) const {
  const auto& cfg = config_;
  const int d = cfg.embed_dim;
  const int p = cfg.patch_size;
  const int ch = cfg.input.channels;
  const int pd = p * p * ch;
  const int grid_w = cfg.input.width / p;
  const int np = cfg.num_patches();
  const int t = np + 1;
  const int heads = cfg.num_heads;
  const int dh = d / heads;
  const int hidden = d * cfg.mlp_ratio;
  const int k = cfg.num_classes;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Layout lay = layout_of(params_, cfg.depth);
  const double* w = params_.values().data();
  auto cmat = [w](std::size_t off, int r, int c) { return nn::ConstMatMap(w + off, r, c); };
  auto cvec = [w](std::size_t off, int n) { return nn::ConstVecMap(w + off, n); };

  // Patchify: row = patch index, column = (iy, ix, c).
  Mat patches(np, pd);
  for (int pi = 0; pi < np; ++pi) {
    const int py = pi / grid_w;
    const int px = pi % grid_w;
    for (int iy = 0; iy < p; ++iy) {
      for (int ix = 0; ix < p; ++ix) {
        const int y = py * p + iy;
        const int x = px * p + ix;
        for (int c = 0; c < ch; ++c) {
          patches(pi, (iy * p + ix) * ch + c) =
              io.image[(static_cast<std::size_t>(y) * cfg.input.width + x) * ch + c];
        }
      }
    }
  }

  Mat z(t, d);
  z.row(0) = cvec(lay.cls, d).transpose();
  z.bottomRows(np) = patches * cmat(lay.patch_w, d, pd).transpose();
  z.bottomRows(np).rowwise() += cvec(lay.patch_b, d).transpose();
  z += cmat(lay.pos, t, d);
  check_finite(z, -1, "patch embedding");

  std::vector<BlockCache> caches(cfg.depth);
  for (int bi = 0; bi < cfg.depth; ++bi) {
    const BlockSlots& s = lay.blocks[bi];
    BlockCache& c = caches[bi];
    c.z_in = z;
    c.a = nn::layer_norm_forward(z, cvec(s.norm1_scale, d), cvec(s.norm1_shift, d), c.ln1);
    c.qkv = c.a * cmat(s.qkv_w, 3 * d, d).transpose();
    c.qkv.rowwise() += cvec(s.qkv_b, 3 * d).transpose();
    c.o.resize(t, d);
    c.probs.resize(heads);
    for (int h = 0; h < heads; ++h) {
      const auto q = c.qkv.middleCols(h * dh, dh);
      const auto kk = c.qkv.middleCols(d + h * dh, dh);
      const auto v = c.qkv.middleCols(2 * d + h * dh, dh);
      Mat scores = (q * kk.transpose()) * attn_scale;
      nn::softmax_rows_in_place(scores);
      c.o.middleCols(h * dh, dh) = scores * v;
      c.probs[h] = std::move(scores);
    }
    c.z_mid = z + c.o * cmat(s.proj_w, d, d).transpose();
    c.z_mid.rowwise() += cvec(s.proj_b, d).transpose();
    check_finite(c.z_mid, bi, "attention");

    c.b = nn::layer_norm_forward(c.z_mid, cvec(s.norm2_scale, d), cvec(s.norm2_shift, d), c.ln2);
    c.h1 = c.b * cmat(s.fc1_w, hidden, d).transpose();
    c.h1.rowwise() += cvec(s.fc1_b, hidden).transpose();
    c.g = c.h1.unaryExpr([](double x) { return nn::gelu(x); });
    z = c.z_mid + c.g * cmat(s.fc2_w, d, hidden).transpose();
    z.rowwise() += cvec(s.fc2_b, d).transpose();
    check_finite(z, bi, "mlp");
  }

  // Final norm and head act on the class token only.
  nn::LayerNormCache final_ln;
  const Mat cls_row = z.topRows(1);
  const Mat feat = nn::layer_norm_forward(cls_row, cvec(lay.norm_scale, d), cvec(lay.norm_shift, d), final_ln);
  Vec logits = cmat(lay.head_w, k, d) * feat.row(0).transpose() + cvec(lay.head_b, k);
  if (!logits.allFinite()) throw NumericError("tiny_vit: non-finite activations in head");
  for (int i = 0; i < k; ++i) io.logits[i] = logits(i);

  const bool backward = io.request.any();
  Vec dlogits = Vec::Zero(k);
  const double loss = cross_entropy(io.logits, io.label, io.weight,
                                    backward ? std::span<double>(dlogits.data(), k) : std::span<double>{});
  if (!backward) return loss;

  const bool want_params = io.request.parameters;
  double* gw = want_params ? io.param_grad.data() : nullptr;
  auto gmat = [gw](std::size_t off, int r, int c) { return nn::MatMap(gw + off, r, c); };
  auto gvec = [gw](std::size_t off, int n) { return nn::VecMap(gw + off, n); };

  if (want_params) {
    gmat(lay.head_w, k, d).noalias() += dlogits * feat.row(0);
    gvec(lay.head_b, k) += dlogits;
  }
  Mat dfeat = (cmat(lay.head_w, k, d).transpose() * dlogits).transpose();
  Mat dz = Mat::Zero(t, d);
  {
    Vec dscale, dshift;
    dz.topRows(1) = nn::layer_norm_backward(dfeat, cvec(lay.norm_scale, d), final_ln,
                                            want_params ? &dscale : nullptr, want_params ? &dshift : nullptr);
    if (want_params) {
      gvec(lay.norm_scale, d) += dscale;
      gvec(lay.norm_shift, d) += dshift;
    }
  }

  for (int bi = cfg.depth - 1; bi >= 0; --bi) {
    const BlockSlots& s = lay.blocks[bi];
    const BlockCache& c = caches[bi];

    // MLP branch: z = z_mid + gelu(ln2(z_mid) W1^T + b1) W2^T + b2
    const Mat& dm = dz;
    Mat dg = dm * cmat(s.fc2_w, d, hidden);
    if (want_params) {
      gmat(s.fc2_w, d, hidden).noalias() += dm.transpose() * c.g;
      gvec(s.fc2_b, d) += dm.colwise().sum().transpose();
    }
    Mat dh1 = dg.cwiseProduct(c.h1.unaryExpr([](double x) { return nn::gelu_grad(x); }));
    Mat db = dh1 * cmat(s.fc1_w, hidden, d);
    if (want_params) {
      gmat(s.fc1_w, hidden, d).noalias() += dh1.transpose() * c.b;
      gvec(s.fc1_b, hidden) += dh1.colwise().sum().transpose();
    }
    Vec dscale, dshift;
    Mat dz_mid = dz + nn::layer_norm_backward(db, cvec(s.norm2_scale, d), c.ln2,
                                              want_params ? &dscale : nullptr,
                                              want_params ? &dshift : nullptr);
    if (want_params) {
      gvec(s.norm2_scale, d) += dscale;
      gvec(s.norm2_shift, d) += dshift;
    }

    // Attention branch: z_mid = z_in + attn(ln1(z_in)) Wo^T + bo
    const Mat& dy = dz_mid;
    Mat d_o = dy * cmat(s.proj_w, d, d);
    if (want_params) {
      gmat(s.proj_w, d, d).noalias() += dy.transpose() * c.o;
      gvec(s.proj_b, d) += dy.colwise().sum().transpose();
    }
    Mat dqkv(t, 3 * d);
    for (int h = 0; h < heads; ++h) {
      const auto q = c.qkv.middleCols(h * dh, dh);
      const auto kk = c.qkv.middleCols(d + h * dh, dh);
      const auto v = c.qkv.middleCols(2 * d + h * dh, dh);
      const Mat& pr = c.probs[h];
      const auto doh = d_o.middleCols(h * dh, dh);
      Mat dp = doh * v.transpose();
      dqkv.middleCols(2 * d + h * dh, dh) = pr.transpose() * doh;
      Vec rowdot = (dp.cwiseProduct(pr)).rowwise().sum();
      Mat ds = pr.cwiseProduct(dp.colwise() - rowdot) * attn_scale;
      dqkv.middleCols(h * dh, dh) = ds * kk;
      dqkv.middleCols(d + h * dh, dh) = ds.transpose() * q;
    }
    Mat da = dqkv * cmat(s.qkv_w, 3 * d, d);
    if (want_params) {
      gmat(s.qkv_w, 3 * d, d).noalias() += dqkv.transpose() * c.a;
      gvec(s.qkv_b, 3 * d) += dqkv.colwise().sum().transpose();
    }
    dz = dz_mid + nn::layer_norm_backward(da, cvec(s.norm1_scale, d), c.ln1,
                                          want_params ? &dscale : nullptr,
                                          want_params ? &dshift : nullptr);
    if (want_params) {
      gvec(s.norm1_scale, d) += dscale;
      gvec(s.norm1_shift, d) += dshift;
    }
  }

  const auto de = dz.bottomRows(np);
  if (want_params) {
    gmat(lay.pos, t, d) += dz;
    gvec(lay.cls, d) += dz.row(0).transpose();
    gmat(lay.patch_w, d, pd).noalias() += de.transpose() * patches;
    gvec(lay.patch_b, d) += de.colwise().sum().transpose();
  }
  if (io.request.inputs) {
    const Mat dpatches = de * cmat(lay.patch_w, d, pd);
    for (int pi = 0; pi < np; ++pi) {
      const int py = pi / grid_w;
      const int px = pi % grid_w;
      for (int iy = 0; iy < p; ++iy) {
        for (int ix = 0; ix < p; ++ix) {
          const int y = py * p + iy;
          const int x = px * p + ix;
          for (int c = 0; c < ch; ++c) {
            io.input_grad[(static_cast<std::size_t>(y) * cfg.input.width + x) * ch + c] =
                dpatches(pi, (iy * p + ix) * ch + c);
          }
        }
      }
    }
  }
  return loss;
}

}  // namespace upat
