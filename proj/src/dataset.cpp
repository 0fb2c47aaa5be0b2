// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <openssl/evp.h>

#include "upat/errors.hpp"
#include "upat/seeding.hpp"

namespace upat {

namespace fs = std::filesystem;

namespace {

struct Blob {
  double cy, cx, sigma;
  std::vector<double> color;
};

constexpr int kNumShapes = 10;

double box_distance(double x, double y, double half_w, double half_h) {
  return std::max(std::abs(x) - half_w, std::abs(y) - half_h);
}

// Approximate signed distance to shape `kind` in units of its half-size.
double shape_distance(int kind, double x, double y) {
  const double r = std::hypot(x, y);
  switch (kind) {
    case 0:  // disk
      return r - 0.9;
    case 1:  // square
      return box_distance(x, y, 0.75, 0.75);
    case 2: {  // triangle
      const double d = std::max({-y, 0.866 * x + 0.5 * y, -0.866 * x + 0.5 * y});
      return d - 0.5;
    }
    case 3:  // plus
      return std::min(box_distance(x, y, 0.95, 0.25), box_distance(x, y, 0.25, 0.95));
    case 4:  // ring
      return std::abs(r - 0.7) - 0.22;
    case 5: {  // diagonal cross
      const double u = (x + y) * 0.7071, v = (x - y) * 0.7071;
      return std::min(box_distance(u, v, 0.95, 0.22), box_distance(u, v, 0.22, 0.95));
    }
    case 6:  // horizontal bars
      return std::max(box_distance(x, y, 0.85, 0.85), std::abs(std::fmod(y + 4.0, 0.8) - 0.4) - 0.18);
    case 7:  // vertical bars
      return std::max(box_distance(x, y, 0.85, 0.85), std::abs(std::fmod(x + 4.0, 0.8) - 0.4) - 0.18);
    case 8:  // two disks
      return std::min(std::hypot(x - 0.5, y), std::hypot(x + 0.5, y)) - 0.4;
    default:  // hollow square
      return std::abs(box_distance(x, y, 0.7, 0.7)) - 0.18;
  }
}

}  // namespace

void DatasetDescriptor::validate() const {
  if (name != "synthetic" && name != "shapes" && name != "cifar10") {
    throw ConfigError("dataset.name must be 'synthetic', 'shapes' or 'cifar10', got '" + name + "'");
  }
  if (num_samples < 0) throw ConfigError("dataset.num_samples must be non-negative");
  if (name != "cifar10" && num_samples < 2) throw ConfigError("dataset.num_samples must be at least 2");
  if (num_classes < 2) throw ConfigError("dataset.num_classes must be at least 2");
  if (image_size < 1 || channels < 1) throw ConfigError("dataset image dimensions must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0) || !(train_fraction > 0.0) ||
      std::abs(train_fraction + val_fraction - 1.0) > 1e-9) {
    throw ConfigError("dataset split fractions must be positive and sum to 1");
  }
  if (noise < 0.0 || jitter < 0.0) throw ConfigError("dataset noise and jitter must be non-negative");
  if (name == "cifar10") {
    if (root.empty()) throw ConfigError("dataset.root is required for cifar10");
    if (num_classes != 10 || image_size != 32 || channels != 3) {
      throw ConfigError("cifar10 is 10 classes of 32x32x3 images");
    }
  }
}

LabeledImages LabeledImages::subset(std::span<const std::size_t> indices) const {
  LabeledImages out;
  out.images = images.gather(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  return out;
}

std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double val_fraction) {
  const auto val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction));
  return {n - val, val};
}

LabeledImages make_synthetic(const DatasetDescriptor& d) {
  const int size = d.image_size;
  const int ch = d.channels;
  const ImageShape shape{size, size, ch};
  auto rng = make_rng(d.seed, kStreamDatasetGeneration);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Class prototypes: three colored blobs each.
  std::vector<std::vector<Blob>> protos(d.num_classes);
  for (auto& proto : protos) {
    for (int b = 0; b < 3; ++b) {
      Blob blob{(0.2 + 0.6 * unit(rng)) * size, (0.2 + 0.6 * unit(rng)) * size,
                (0.08 + 0.10 * unit(rng)) * size, std::vector<double>(ch)};
      for (double& c : blob.color) c = unit(rng) - 0.5;
      proto.push_back(std::move(blob));
    }
  }

  LabeledImages out;
  out.images = ImageBatch(d.num_samples, shape);
  out.labels.resize(d.num_samples);
  std::vector<Blob> blobs;
  for (int n = 0; n < d.num_samples; ++n) {
    const int label = n % d.num_classes;
    out.labels[n] = label;
    blobs.clear();
    for (const Blob& p : protos[label]) {
      Blob b = p;
      b.cy += gauss(rng) * d.jitter * size;
      b.cx += gauss(rng) * d.jitter * size;
      b.sigma *= 0.8 + 0.4 * unit(rng);
      const double amp = 0.6 + 0.6 * unit(rng);
      for (double& c : b.color) c = amp * (c + 0.15 * gauss(rng));
      blobs.push_back(std::move(b));
    }
    Blob distractor{unit(rng) * size, unit(rng) * size, (0.08 + 0.10 * unit(rng)) * size, std::vector<double>(ch)};
    for (double& c : distractor.color) c = 0.8 * (unit(rng) - 0.5);
    blobs.push_back(std::move(distractor));

    const double base = 0.35 + 0.3 * unit(rng);
    std::vector<double> tint(ch);
    for (double& t : tint) t = base + 0.05 * gauss(rng);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        for (int c = 0; c < ch; ++c) {
          double v = tint[c];
          for (const Blob& b : blobs) {
            const double r2 = (y + 0.5 - b.cy) * (y + 0.5 - b.cy) + (x + 0.5 - b.cx) * (x + 0.5 - b.cx);
            v += b.color[c] * std::exp(-r2 / (2.0 * b.sigma * b.sigma));
          }
          v += d.noise * gauss(rng);
          out.images.at(n, y, x, c) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

LabeledImages make_shapes(const DatasetDescriptor& d) {
  if (d.num_classes > kNumShapes) {
    throw ConfigError("dataset 'shapes' supports at most " + std::to_string(kNumShapes) + " classes");
  }
  const int size = d.image_size;
  const int ch = d.channels;
  auto rng = make_rng(d.seed, kStreamDatasetGeneration);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  LabeledImages out;
  out.images = ImageBatch(d.num_samples, {size, size, ch});
  out.labels.resize(d.num_samples);
  std::vector<double> fg(ch), bg(ch), ramp(ch);
  for (int n = 0; n < d.num_samples; ++n) {
    const int label = n % d.num_classes;
    out.labels[n] = label;
    // Colors carry no class information; only the geometry does. The
    // figure is always lighter than its background.
    const double lift = 0.3 + 0.2 * unit(rng);
    for (int c = 0; c < ch; ++c) {
      bg[c] = 0.05 + 0.45 * unit(rng);
      fg[c] = std::min(1.0, bg[c] + lift + 0.1 * gauss(rng));
    }
    for (double& v : ramp) v = 0.15 * gauss(rng);
    const double angle = 2.0 * std::acos(-1.0) * unit(rng);
    const double half = (0.22 + 0.12 * unit(rng)) * size;
    const double cy = (0.5 + d.jitter * gauss(rng)) * size;
    const double cx = (0.5 + d.jitter * gauss(rng)) * size;
    const double tilt = 0.25 * gauss(rng);
    const double cs = std::cos(tilt), sn = std::sin(tilt);
    // A small blob of a random color as clutter.
    Blob clutter{unit(rng) * size, unit(rng) * size, (0.05 + 0.05 * unit(rng)) * size, std::vector<double>(ch)};
    for (double& c : clutter.color) c = unit(rng) - 0.5;

    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double py = y + 0.5 - cy, px = x + 0.5 - cx;
        const double u = (cs * px + sn * py) / half, v = (-sn * px + cs * py) / half;
        const double alpha = std::clamp(0.5 - shape_distance(label, u, v) * half, 0.0, 1.0);
        const double t = (std::cos(angle) * (x + 0.5) + std::sin(angle) * (y + 0.5)) / size - 0.5;
        const double dy = y + 0.5 - clutter.cy, dx = x + 0.5 - clutter.cx;
        const double bump = std::exp(-(dy * dy + dx * dx) / (2.0 * clutter.sigma * clutter.sigma));
        for (int c = 0; c < ch; ++c) {
          double value = (1.0 - alpha) * (bg[c] + ramp[c] * t) + alpha * fg[c];
          value += clutter.color[c] * bump + d.noise * gauss(rng);
          out.images.at(n, y, x, c) = std::clamp(value, 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

namespace {

std::string hex_digest(EVP_MD_CTX* ctx) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  return hex_digest(ctx);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return hex_digest(ctx);
}

LabeledImages load_cifar10(const DatasetDescriptor& d) {
  const std::vector<std::string> files = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                                          "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"};
  if (!fs::is_directory(d.root)) {
    throw DataError("dataset root '" + d.root + "' does not exist; point dataset.root at the extracted "
                    "cifar-10-batches-bin directory");
  }
  for (const auto& f : files) {
    const fs::path p = fs::path(d.root) / f;
    if (!fs::exists(p)) throw DataError("missing dataset file " + p.string());
  }
  for (const auto& [file, expected] : d.checksums) {
    const std::string actual = sha256_file((fs::path(d.root) / file).string());
    if (actual != expected) {
      throw DataError("checksum mismatch for " + file + ": expected " + expected + ", got " + actual);
    }
  }
  constexpr int kSide = 32;
  constexpr std::size_t kRecord = 1 + 3 * kSide * kSide;
  LabeledImages out;
  out.images = ImageBatch(0, {kSide, kSide, 3});
  std::vector<unsigned char> rec(kRecord);
  for (const auto& f : files) {
    std::ifstream in(fs::path(d.root) / f, std::ios::binary);
    while (in.read(reinterpret_cast<char*>(rec.data()), kRecord)) {
      if (d.num_samples > 0 && out.labels.size() >= static_cast<std::size_t>(d.num_samples)) break;
      if (rec[0] > 9) throw DataError("corrupt label in " + f);
      ImageBatch one(1, {kSide, kSide, 3});
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < kSide; ++y) {
          for (int x = 0; x < kSide; ++x) {
            one.at(0, y, x, c) = rec[1 + c * kSide * kSide + y * kSide + x] / 255.0;
          }
        }
      }
      out.images.append(one);
      out.labels.push_back(rec[0]);
    }
    if (in.gcount() != 0 && in.gcount() != static_cast<std::streamsize>(kRecord)) {
      throw DataError("truncated record in " + f);
    }
  }
  return out;
}

DatasetSplits ingest_dataset(const DatasetDescriptor& d) {
  d.validate();
  LabeledImages all = d.name == "synthetic" ? make_synthetic(d) : d.name == "shapes" ? make_shapes(d) : load_cifar10(d);
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(d.seed, kStreamDatasetSplit);
  std::shuffle(order.begin(), order.end(), rng);
  const auto [n_train, n_val] = split_sizes(all.size(), d.val_fraction);
  DatasetSplits s;
  s.num_classes = d.num_classes;
  s.train = all.subset(std::span<const std::size_t>(order.data(), n_train));
  s.val = all.subset(std::span<const std::size_t>(order.data() + n_train, n_val));
  return s;
}

ImageBatch augment(const ImageBatch& batch, const AugmentConfig& cfg, std::mt19937_64& rng) {
  if (!cfg.flip && cfg.crop_padding == 0) return batch;
  const ImageShape s = batch.shape();
  ImageBatch out(batch.count(), s);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> shift(-cfg.crop_padding, cfg.crop_padding);
  for (std::size_t n = 0; n < batch.count(); ++n) {
    const bool flip = cfg.flip && coin(rng) == 1;
    const int dy = cfg.crop_padding > 0 ? shift(rng) : 0;
    const int dx = cfg.crop_padding > 0 ? shift(rng) : 0;
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        const int sy = y + dy;
        int sx = x + dx;
        if (flip) sx = s.width - 1 - sx;
        const bool inside = sy >= 0 && sy < s.height && sx >= 0 && sx < s.width;
        for (int c = 0; c < s.channels; ++c) out.at(n, y, x, c) = inside ? batch.at(n, sy, sx, c) : 0.0;
      }
    }
  }
  return out;
}

}  // namespace upat
