// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` configuration text. `#` starts a comment, blank lines
// are ignored, later assignments win. Keys:
//
//   model      width attention heads self_attention_layers det_pair_layers
//              latent_pair_layers latent_head_layers key_layers
//              decoder_hidden_layers
//   training   batch_size learning_rate iterations seed eval_interval
//              eval_episodes checkpoint_interval
//   episodes   dataset (gp|images) min_context max_points
//   gp         kernel (fixed|random) length_scale signal_scale noise_std
//              length_scale_min length_scale_max signal_scale_min
//              signal_scale_max x_min x_max
//   images     image_source (synthetic|idx) image_train_path image_test_path
//              image_height image_width synthetic_train_count
//              synthetic_test_count synthetic_seed

#pragma once

#include "anp/train.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace anp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Applies one assignment. Throws ConfigError naming an unknown key or a
/// value that does not parse.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

/// Parses text over `base`, then validates. Errors carry the line number.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config_file(const std::string& path);

/// Every key, one per line, values at round-trip precision.
std::string format_config(const TrainConfig& config);

const std::vector<std::string>& config_keys();

}  // namespace anp
