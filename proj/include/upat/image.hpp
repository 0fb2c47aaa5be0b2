// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace upat {

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  bool operator==(const ImageShape&) const = default;
};

// A batch of images stored NHWC with pixel values nominally in [0, 1].
class ImageBatch {
 public:
  ImageBatch() = default;
  ImageBatch(std::size_t count, ImageShape shape)
      : count_(count), shape_(shape), pixels_(count * shape.size(), 0.0) {}
  ImageBatch(std::size_t count, ImageShape shape, std::vector<double> pixels)
      : count_(count), shape_(shape), pixels_(std::move(pixels)) {
    if (pixels_.size() != count_ * shape_.size()) {
      throw std::invalid_argument("ImageBatch: pixel buffer size does not match shape");
    }
  }

  std::size_t count() const { return count_; }
  const ImageShape& shape() const { return shape_; }
  bool empty() const { return count_ == 0; }

  std::span<double> image(std::size_t i) {
    return {pixels_.data() + i * shape_.size(), shape_.size()};
  }
  std::span<const double> image(std::size_t i) const {
    return {pixels_.data() + i * shape_.size(), shape_.size()};
  }

  std::vector<double>& pixels() { return pixels_; }
  const std::vector<double>& pixels() const { return pixels_; }

  double& at(std::size_t n, int y, int x, int c) {
    return pixels_[n * shape_.size() + (static_cast<std::size_t>(y) * shape_.width + x) * shape_.channels + c];
  }
  double at(std::size_t n, int y, int x, int c) const {
    return pixels_[n * shape_.size() + (static_cast<std::size_t>(y) * shape_.width + x) * shape_.channels + c];
  }

  // Appends all images of `other`; shapes must agree.
  void append(const ImageBatch& other) {
    if (count_ != 0 && !(other.shape_ == shape_)) {
      throw std::invalid_argument("ImageBatch::append: shape mismatch");
    }
    if (count_ == 0) shape_ = other.shape_;
    pixels_.insert(pixels_.end(), other.pixels_.begin(), other.pixels_.end());
    count_ += other.count_;
  }

  ImageBatch gather(std::span<const std::size_t> indices) const {
    ImageBatch out(indices.size(), shape_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      auto src = image(indices[i]);
      std::copy(src.begin(), src.end(), out.image(i).begin());
    }
    return out;
  }

  bool operator==(const ImageBatch&) const = default;

 private:
  std::size_t count_ = 0;
  ImageShape shape_{};
  std::vector<double> pixels_;
};

}  // namespace upat
