// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace anp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct Field {
  std::function<void(TrainConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define SIZE_FIELD(name, member)                                                               \
  {name, {[](TrainConfig& c, const std::string& k, const std::string& v) { c.member = to_size(k, v); }, \
          [](const TrainConfig& c) { return std::to_string(c.member); }}}
#define DOUBLE_FIELD(name, member)                                                               \
  {name, {[](TrainConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
          [](const TrainConfig& c) { return fmt(c.member); }}}
#define TEXT_FIELD(name, member)                                                          \
  {name, {[](TrainConfig& c, const std::string&, const std::string& v) { c.member = v; }, \
          [](const TrainConfig& c) { return c.member; }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      SIZE_FIELD("width", model.width),
      {"attention",
       {[](TrainConfig& c, const std::string& k, const std::string& v) {
          try {
            c.model.attention = parse_attention_kind(v);
          } catch (const std::exception&) {
            throw ConfigError("config: '" + k + "' must be uniform, laplace, dot or multihead, got '" + v + "'");
          }
        },
        [](const TrainConfig& c) { return to_string(c.model.attention); }}},
      SIZE_FIELD("heads", model.heads),
      SIZE_FIELD("self_attention_layers", model.self_attention_layers),
      SIZE_FIELD("det_pair_layers", model.det_pair_layers),
      SIZE_FIELD("latent_pair_layers", model.latent_pair_layers),
      SIZE_FIELD("latent_head_layers", model.latent_head_layers),
      SIZE_FIELD("key_layers", model.key_layers),
      SIZE_FIELD("decoder_hidden_layers", model.decoder_hidden_layers),
      SIZE_FIELD("batch_size", batch_size),
      DOUBLE_FIELD("learning_rate", learning_rate),
      SIZE_FIELD("iterations", iterations),
      {"seed",
       {[](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.seed); }}},
      SIZE_FIELD("eval_interval", eval_interval),
      SIZE_FIELD("eval_episodes", eval_episodes),
      SIZE_FIELD("checkpoint_interval", checkpoint_interval),
      {"dataset",
       {[](TrainConfig& c, const std::string& k, const std::string& v) {
          if (v == "gp") c.dataset = DatasetKind::GP;
          else if (v == "images") c.dataset = DatasetKind::Images;
          else throw ConfigError("config: '" + k + "' must be gp or images, got '" + v + "'");
        },
        [](const TrainConfig& c) { return std::string(c.dataset == DatasetKind::GP ? "gp" : "images"); }}},
      SIZE_FIELD("min_context", min_context),
      SIZE_FIELD("max_points", max_points),
      {"kernel",
       {[](TrainConfig& c, const std::string& k, const std::string& v) {
          if (v == "fixed") c.kernel = HyperMode::Fixed;
          else if (v == "random") c.kernel = HyperMode::Random;
          else throw ConfigError("config: '" + k + "' must be fixed or random, got '" + v + "'");
        },
        [](const TrainConfig& c) { return std::string(c.kernel == HyperMode::Fixed ? "fixed" : "random"); }}},
      DOUBLE_FIELD("length_scale", gp.length_scale),
      DOUBLE_FIELD("signal_scale", gp.signal_scale),
      DOUBLE_FIELD("noise_std", gp.noise_std),
      DOUBLE_FIELD("length_scale_min", length_scale_min),
      DOUBLE_FIELD("length_scale_max", length_scale_max),
      DOUBLE_FIELD("signal_scale_min", signal_scale_min),
      DOUBLE_FIELD("signal_scale_max", signal_scale_max),
      DOUBLE_FIELD("x_min", x_min),
      DOUBLE_FIELD("x_max", x_max),
      {"image_source",
       {[](TrainConfig& c, const std::string& k, const std::string& v) {
          if (v == "synthetic") c.image_source = ImageSource::Synthetic;
          else if (v == "idx") c.image_source = ImageSource::Idx;
          else throw ConfigError("config: '" + k + "' must be synthetic or idx, got '" + v + "'");
        },
        [](const TrainConfig& c) {
          return std::string(c.image_source == ImageSource::Synthetic ? "synthetic" : "idx");
        }}},
      TEXT_FIELD("image_train_path", image_train_path),
      TEXT_FIELD("image_test_path", image_test_path),
      SIZE_FIELD("image_height", image_height),
      SIZE_FIELD("image_width", image_width),
      SIZE_FIELD("synthetic_train_count", synthetic_train_count),
      SIZE_FIELD("synthetic_test_count", synthetic_test_count),
      {"synthetic_seed",
       {[](TrainConfig& c, const std::string& k, const std::string& v) { c.synthetic_seed = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.synthetic_seed); }}},
  };
  return table;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef TEXT_FIELD

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [name, f] : fields()) {
    if (name == key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return base;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace anp
