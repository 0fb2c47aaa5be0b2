// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace upat {

enum class Method {
  kBaseline,     // clean cross-entropy only
  kPat,          // sample-wise multi-step pyramid adversary
  kUpat,         // universal pyramid adversary, free gradients
  kUpatFlat,     // universal adversary without the pyramid (S=[1], M=[1])
  kUpatNoClean,  // universal adversary, adversarial loss only
};

std::string_view method_name(Method m);
Method parse_method(std::string_view name);  // throws ConfigError

inline bool is_universal(Method m) {
  return m == Method::kUpat || m == Method::kUpatFlat || m == Method::kUpatNoClean;
}

}  // namespace upat
