// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "upat/image.hpp"

namespace upat {

struct DatasetDescriptor {
  // "synthetic": seeded Gaussian-blob classes. "shapes": seeded geometric
  // figures in random colors, one figure per class. "cifar10": the CIFAR-10
  // binary distribution (data_batch_*.bin, test_batch.bin) under `root`.
  std::string name = "synthetic";
  std::string root;
  int num_samples = 512;  // synthetic size, or a cap on cifar10 (0 = all)
  int num_classes = 10;
  int image_size = 32;
  int channels = 3;
  double train_fraction = 0.9;
  double val_fraction = 0.1;
  double noise = 0.08;          // synthetic pixel noise std
  double jitter = 0.12;         // synthetic position jitter, fraction of image size
  std::uint64_t seed = 0;
  std::map<std::string, std::string> checksums;  // file name -> SHA-256 hex

  void validate() const;  // throws ConfigError
  bool operator==(const DatasetDescriptor&) const = default;
};

struct LabeledImages {
  ImageBatch images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  LabeledImages subset(std::span<const std::size_t> indices) const;
  bool operator==(const LabeledImages&) const = default;
};

struct DatasetSplits {
  LabeledImages train;
  LabeledImages val;
  int num_classes = 10;
};

// Sizes of (train, val) for `n` samples; val takes floor(n * val_fraction).
std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double val_fraction);

LabeledImages make_synthetic(const DatasetDescriptor& d);
LabeledImages make_shapes(const DatasetDescriptor& d);
LabeledImages load_cifar10(const DatasetDescriptor& d);

// Loads or generates the data, shuffles with the descriptor seed, splits.
DatasetSplits ingest_dataset(const DatasetDescriptor& d);

// SHA-256 of a file as lowercase hex.
std::string sha256_file(const std::string& path);
std::string sha256_hex(std::string_view bytes);

struct AugmentConfig {
  bool flip = true;
  int crop_padding = 4;
  bool operator==(const AugmentConfig&) const = default;
};

// Random horizontal flip and zero-padded random crop, per image.
ImageBatch augment(const ImageBatch& batch, const AugmentConfig& cfg, std::mt19937_64& rng);

}  // namespace upat
