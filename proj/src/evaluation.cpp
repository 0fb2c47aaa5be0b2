// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "upat/errors.hpp"
#include "upat/seeding.hpp"

namespace upat {

namespace {

constexpr double kNoiseSigma[] = {0.0, 0.04, 0.08, 0.12};
constexpr double kBlurSigma[] = {0.0, 0.5, 1.0, 1.5};
constexpr double kContrast[] = {1.0, 0.7, 0.5, 0.3};
constexpr int kPixelBlock[] = {1, 2, 3, 4};

std::size_t errors_in(const PassResult& r, std::span<const int> labels, int k) {
  return labels.size() - r.correct(labels, k);
}

void blur_image(std::span<double> img, ImageShape s, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& k : kernel) k /= norm;
  auto idx = [&](int y, int x, int c) { return (static_cast<std::size_t>(y) * s.width + x) * s.channels + c; };
  std::vector<double> tmp(img.size());
  // Replicated borders.
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      for (int c = 0; c < s.channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img[idx(y, std::clamp(x + i, 0, s.width - 1), c)];
        tmp[idx(y, x, c)] = acc;
      }
    }
  }
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      for (int c = 0; c < s.channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp[idx(std::clamp(y + i, 0, s.height - 1), x, c)];
        img[idx(y, x, c)] = acc;
      }
    }
  }
}

void pixelate_image(std::span<double> img, ImageShape s, int block) {
  for (int by = 0; by < s.height; by += block) {
    for (int bx = 0; bx < s.width; bx += block) {
      const int ey = std::min(by + block, s.height), ex = std::min(bx + block, s.width);
      for (int c = 0; c < s.channels; ++c) {
        double sum = 0.0;
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) sum += img[(static_cast<std::size_t>(y) * s.width + x) * s.channels + c];
        const double mean = sum / ((ey - by) * (ex - bx));
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) img[(static_cast<std::size_t>(y) * s.width + x) * s.channels + c] = mean;
      }
    }
  }
}

Raster unit_raster(const std::vector<double>& v, ImageShape s) {
  return to_raster(normalize_min_max(v), s.width, s.height, s.channels);
}

nlohmann::json nullable(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

AccuracyResult evaluate_accuracy(const Classifier& model, const LabeledImages& data, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("evaluate_accuracy: batch_size must be positive");
  AccuracyResult out;
  out.count = data.size();
  if (data.size() == 0) return out;
  std::size_t hits = 0;
  double loss = 0.0;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t end = std::min(data.size(), begin + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const LabeledImages b = data.subset(idx);
    const PassResult r = forward_loss(model, b.images, b.labels);
    hits += r.correct(b.labels, model.num_classes());
    loss += r.loss * static_cast<double>(b.size());
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  out.loss = loss / static_cast<double>(data.size());
  return out;
}

StrengthResult attack_strength(const Classifier& model, const LabeledImages& data, const AdversaryMode& mode,
                               int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("attack_strength: batch_size must be positive");
  StrengthResult out;
  if (data.size() == 0) return out;
  const int k = model.num_classes();
  std::vector<double> shared;
  std::mt19937_64 rng;
  if (const auto* u = std::get_if<UniversalAdversary>(&mode)) {
    if (!u->state) throw std::invalid_argument("attack_strength: universal adversary has no state");
    shared = materialize(*u->state, u->radius);
  } else {
    rng = make_rng(std::get<SamplewiseAdversary>(mode).seed, kStreamEvaluation);
  }
  std::size_t clean_err = 0, adv_err = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t end = std::min(data.size(), begin + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const LabeledImages b = data.subset(idx);
    clean_err += errors_in(forward_loss(model, b.images, b.labels), b.labels, k);
    ImageBatch adv;
    if (!shared.empty()) {
      adv = apply_perturbation(b.images, std::span<const std::vector<double>>(&shared, 1));
    } else {
      const auto& s = std::get<SamplewiseAdversary>(mode);
      adv = pgd_pyramid_attack(model, b.images, b.labels, s.attack, s.radius, nullptr, rng).perturbed;
    }
    adv_err += errors_in(forward_loss(model, adv, b.labels), b.labels, k);
  }
  const double n = static_cast<double>(data.size());
  out.clean_error = static_cast<double>(clean_err) / n;
  out.adv_error = static_cast<double>(adv_err) / n;
  out.increase = out.adv_error - out.clean_error;
  return out;
}

const std::vector<std::string>& corruption_names() {
  static const std::vector<std::string> names = {"identity", "gaussian_noise", "blur", "contrast", "pixelate"};
  return names;
}

ImageBatch corrupt(const ImageBatch& images, std::string_view name, int severity, std::uint64_t seed) {
  if (severity < 0 || severity > kMaxSeverity) {
    throw std::invalid_argument("corrupt: severity must lie in [0, " + std::to_string(kMaxSeverity) + "]");
  }
  const auto& names = corruption_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ConfigError("unknown corruption '" + std::string(name) + "'");
  }
  ImageBatch out = images;
  if (severity == 0 || name == "identity") return out;
  const ImageShape s = images.shape();
  if (name == "gaussian_noise") {
    auto rng = make_rng(seed, kStreamCorruption);
    std::normal_distribution<double> g(0.0, kNoiseSigma[severity]);
    for (double& v : out.pixels()) v = std::clamp(v + g(rng), 0.0, 1.0);
  } else if (name == "blur") {
    for (std::size_t n = 0; n < out.count(); ++n) blur_image(out.image(n), s, kBlurSigma[severity]);
  } else if (name == "contrast") {
    for (std::size_t n = 0; n < out.count(); ++n) {
      auto img = out.image(n);
      const double mean = std::accumulate(img.begin(), img.end(), 0.0) / static_cast<double>(img.size());
      for (double& v : img) v = std::clamp(mean + kContrast[severity] * (v - mean), 0.0, 1.0);
    }
  } else {
    for (std::size_t n = 0; n < out.count(); ++n) pixelate_image(out.image(n), s, kPixelBlock[severity]);
  }
  return out;
}

CorruptionAccuracies corruption_eval(const Classifier& model, const LabeledImages& data,
                                     std::span<const std::string> corruptions, std::uint64_t seed,
                                     int max_severity, std::vector<std::string>* warnings) {
  if (max_severity < 0 || max_severity > kMaxSeverity) {
    throw std::invalid_argument("corruption_eval: max_severity out of range");
  }
  CorruptionAccuracies out;
  for (const std::string& name : corruptions) {
    for (int sev = 0; sev <= max_severity; ++sev) {
      LabeledImages c{corrupt(data.images, name, sev, seed), data.labels};
      out[name][sev] = evaluate_accuracy(model, c).accuracy;
    }
    if (name == "gaussian_noise" && warnings) {
      for (int sev = 1; sev <= max_severity; ++sev) {
        if (out[name][sev] > out[name][sev - 1]) {
          warnings->push_back("gaussian_noise accuracy rises from severity " + std::to_string(sev - 1) + " to " +
                              std::to_string(sev));
        }
      }
    }
  }
  return out;
}

std::vector<double> filter_normalized_direction(const ParameterSet& params, std::mt19937_64& rng) {
  std::vector<double> d(params.size(), 0.0);
  std::normal_distribution<double> g(0.0, 1.0);
  for (const ParamSlot& slot : params.slots()) {
    if (slot.role != ParamRole::kWeight && slot.role != ParamRole::kEmbedding) continue;
    const auto w = params.view(slot);
    const std::size_t len = slot.row_length();
    for (std::size_t r = 0; r < slot.rows(); ++r) {
      double wn = 0.0, dn = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double v = g(rng);
        d[slot.offset + r * len + i] = v;
        wn += w[r * len + i] * w[r * len + i];
        dn += v * v;
      }
      const double scale = (wn > 0.0 && dn > 0.0) ? std::sqrt(wn / dn) : 0.0;
      for (std::size_t i = 0; i < len; ++i) d[slot.offset + r * len + i] *= scale;
    }
  }
  return d;
}

LandscapeGrid loss_landscape(const Classifier& model, const LabeledImages& sample, int grid_n, double span,
                             std::uint64_t seed) {
  if (grid_n < 1 || grid_n % 2 == 0) throw std::invalid_argument("loss_landscape: grid size must be odd");
  if (!(span > 0.0)) throw std::invalid_argument("loss_landscape: span must be positive");
  if (sample.size() == 0) throw std::invalid_argument("loss_landscape: empty sample");
  auto rng = make_rng(seed, kStreamLandscape);
  const std::vector<double> d1 = filter_normalized_direction(model.parameters(), rng);
  const std::vector<double> d2 = filter_normalized_direction(model.parameters(), rng);
  std::unique_ptr<Classifier> probe = model.clone();
  const std::vector<double>& theta = model.parameters().values();
  std::vector<double>& w = probe->parameters().values();

  LandscapeGrid g;
  g.n = grid_n;
  g.span = span;
  const int half = grid_n / 2;
  for (int i = 0; i < grid_n; ++i) g.alphas.push_back(half == 0 ? 0.0 : span * (i - half) / half);
  g.loss.resize(static_cast<std::size_t>(grid_n) * grid_n);
  for (int i = 0; i < grid_n; ++i) {
    for (int j = 0; j < grid_n; ++j) {
      const double a = g.alphas[i], b = g.alphas[j];
      for (std::size_t p = 0; p < w.size(); ++p) w[p] = theta[p] + a * d1[p] + b * d2[p];
      g.loss[static_cast<std::size_t>(i) * grid_n + j] = forward_loss(*probe, sample.images, sample.labels).loss;
    }
  }
  return g;
}

std::vector<double> normalize_min_max(std::span<const double> values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  std::vector<double> out(values.size(), 0.5);
  if (*hi > *lo) {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / (*hi - *lo);
  }
  return out;
}

PyramidImages export_pyramid_images(const PyramidPerturbation& p, double radius) {
  PyramidImages out;
  const ImageShape t = p.target_shape();
  for (std::size_t i = 0; i < p.levels().size(); ++i) {
    const int s = p.spec().scales[i];
    const double m = p.spec().multipliers[i];
    const LevelGrid& g = p.level(i);
    // Nearest-neighbor upscale of one level's clipped, weighted contribution.
    std::vector<double> full(t.size());
    for (int y = 0; y < t.height; ++y) {
      for (int x = 0; x < t.width; ++x) {
        for (int c = 0; c < t.channels; ++c) {
          const double v = g.at(y / s, x / s, g.depth == 1 ? 0 : c);
          full[(static_cast<std::size_t>(y) * t.width + x) * t.channels + c] = m * std::clamp(v, -radius, radius);
        }
      }
    }
    out.scales.push_back(s);
    out.levels.push_back(unit_raster(full, t));
  }
  out.composite = unit_raster(materialize(p, radius), t);
  return out;
}

Raster landscape_heatmap(const LandscapeGrid& grid) {
  return to_raster(normalize_min_max(grid.loss), grid.n, grid.n, 1);
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json corr = nlohmann::json::object();
  for (const auto& [name, bysev] : r.corruption_accs) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& [sev, acc] : bysev) row[std::to_string(sev)] = acc;
    corr[name] = row;
  }
  return {{"schema_version", 1},
          {"clean_acc", r.clean_acc},
          {"adv_error_increase_train", nullable(r.adv_error_increase_train)},
          {"adv_error_increase_val", nullable(r.adv_error_increase_val)},
          {"corruption_accs", corr},
          {"landscape", {{"n", r.landscape.n}, {"span", r.landscape.span}, {"alphas", r.landscape.alphas},
                         {"loss", r.landscape.loss}}}};
}

}  // namespace upat
