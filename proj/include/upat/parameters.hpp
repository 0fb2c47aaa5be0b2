// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace upat {

// What a tensor is used for. Drives weight decay and filter normalization.
enum class ParamRole { kWeight, kBias, kNormScale, kNormShift, kEmbedding };

std::string_view role_name(ParamRole role);
ParamRole parse_role(std::string_view name);

struct ParamSlot {
  std::string name;
  std::vector<int> shape;  // first dimension indexes output units ("filters")
  std::size_t offset = 0;
  std::size_t size = 0;
  ParamRole role = ParamRole::kWeight;

  // Number of rows when viewed as (shape[0], size / shape[0]).
  std::size_t rows() const { return shape.empty() ? 1 : static_cast<std::size_t>(shape.front()); }
  std::size_t row_length() const { return size / rows(); }
  bool operator==(const ParamSlot&) const = default;
};

// Named tensors backed by one contiguous buffer, so optimizers, checkpoints
// and landscape directions can treat the whole model as a flat vector.
class ParameterSet {
 public:
  const ParamSlot& add(std::string name, std::vector<int> shape, ParamRole role);

  std::span<const ParamSlot> slots() const { return slots_; }
  const ParamSlot& slot(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return values_.size(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::span<double> view(const ParamSlot& s) { return {values_.data() + s.offset, s.size}; }
  std::span<const double> view(const ParamSlot& s) const { return {values_.data() + s.offset, s.size}; }
  std::span<double> view(std::string_view name) { return view(slot(name)); }
  std::span<const double> view(std::string_view name) const { return view(slot(name)); }

  bool operator==(const ParameterSet&) const = default;

 private:
  std::vector<ParamSlot> slots_;
  std::vector<double> values_;
};

}  // namespace upat
