// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-file training snapshot. Layout:
//
//   "UPATCKPT" | u32 format version | u64 header bytes | JSON header | f64 payload
//
// Integers and doubles are little-endian. The header lists every named array
// with its shape and element offset into the payload. Encoding is canonical,
// so decode followed by encode reproduces the input bytes.

#pragma once

#include <cstdint>
#include <string>

#include "upat/training.hpp"

namespace upat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainingState state;
  std::string method;
  std::string config_yaml;  // snapshot of the experiment config
};

std::string encode_checkpoint(const TrainingState& state, const std::string& method, const std::string& config_yaml);
Checkpoint decode_checkpoint(const std::string& bytes);  // throws DataError

// Writes through a temporary file and renames, so a crash never leaves a torn file.
void save_checkpoint(const std::string& path, const TrainingState& state, const std::string& method,
                     const std::string& config_yaml);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace upat
