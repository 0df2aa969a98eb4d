// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace anp {

Var Params::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  auto st = store_->find(name);
  if (st == store_->end()) throw std::out_of_range("missing parameter '" + name + "'");
  Var v = trainable_ ? graph_->parameter(st->second) : graph_->constant(st->second);
  bound_.emplace(name, v);
  return v;
}

ParamStore Params::gradients() const {
  ParamStore out;
  for (const auto& [name, value] : *store_) {
    auto it = bound_.find(name);
    out.emplace(name, it == bound_.end() ? Tensor(value.shape(), 0.0) : graph_->grad(it->second));
  }
  return out;
}

void init_mlp(ParamStore& store, const std::string& prefix, std::size_t in_width,
              std::span<const std::size_t> layer_widths, Rng& rng) {
  std::size_t fan_in = in_width;
  for (std::size_t i = 0; i < layer_widths.size(); ++i) {
    const std::size_t fan_out = layer_widths[i];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w(Shape{fan_in, fan_out});
    for (double& v : w.values()) v = rng.uniform(-limit, limit);
    const std::string layer = prefix + "/l" + std::to_string(i);
    store[layer + "/w"] = std::move(w);
    store[layer + "/b"] = Tensor(Shape{fan_out}, 0.0);
    fan_in = fan_out;
  }
}

Var linear(Params& params, const std::string& prefix, Var input) {
  Var w = params(prefix + "/w");
  Var b = params(prefix + "/b");
  if (w.value().rank() != 2 || w.rows() != input.cols()) {
    throw ShapeError("linear '" + prefix + "': weight " + shape_str(w.shape()) +
                     " does not accept input " + shape_str(input.shape()));
  }
  return add(matmul(input, w), b);
}

Var forward_mlp(Params& params, const std::string& prefix, Var input,
                std::span<const std::size_t> layer_widths) {
  Var h = input;
  for (std::size_t i = 0; i < layer_widths.size(); ++i) {
    const std::string layer = prefix + "/l" + std::to_string(i);
    h = linear(params, layer, h);
    if (h.cols() != layer_widths[i]) {
      throw ShapeError("mlp '" + layer + "': expected width " + std::to_string(layer_widths[i]) +
                       ", parameters give " + std::to_string(h.cols()));
    }
    if (i + 1 < layer_widths.size()) h = relu(h);
  }
  return h;
}

}  // namespace anp
