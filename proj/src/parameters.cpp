// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/parameters.hpp"

#include <functional>
#include <numeric>
#include <stdexcept>

namespace upat {

std::string_view role_name(ParamRole role) {
  switch (role) {
    case ParamRole::kWeight: return "weight";
    case ParamRole::kBias: return "bias";
    case ParamRole::kNormScale: return "norm_scale";
    case ParamRole::kNormShift: return "norm_shift";
    case ParamRole::kEmbedding: return "embedding";
  }
  return "weight";
}

ParamRole parse_role(std::string_view name) {
  for (ParamRole r : {ParamRole::kWeight, ParamRole::kBias, ParamRole::kNormScale,
                      ParamRole::kNormShift, ParamRole::kEmbedding}) {
    if (role_name(r) == name) return r;
  }
  throw std::invalid_argument("unknown parameter role: " + std::string(name));
}

const ParamSlot& ParameterSet::add(std::string name, std::vector<int> shape, ParamRole role) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  ParamSlot s;
  s.name = std::move(name);
  s.size = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  s.shape = std::move(shape);
  s.offset = values_.size();
  s.role = role;
  values_.resize(values_.size() + s.size, 0.0);
  slots_.push_back(std::move(s));
  return slots_.back();
}

const ParamSlot& ParameterSet::slot(std::string_view name) const {
  for (const auto& s : slots_) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& s : slots_) {
    if (s.name == name) return true;
  }
  return false;
}

}  // namespace upat
