// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary layout, all integers little-endian:
//
//   "ANPC"  u32 version
//   u64 length, config text
//   u64 tensor count, then per tensor:
//       u64 length, name   u32 rank   u64 dims[rank]   f64 values[]
//   u64 adam step   f64 beta1 beta2 epsilon
//   u64 tensor count, first moments    (tensor encoding as above)
//   u64 tensor count, second moments
//   u64 iteration
//   u64 length, rng state text

#pragma once

#include "anp/mlp.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace anp {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config_text;
  ParamStore params;
  std::uint64_t adam_step = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  ParamStore adam_m;
  ParamStore adam_v;
  std::uint64_t iteration = 0;
  std::string rng_state;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError on bad magic, unsupported version or truncation.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace anp
