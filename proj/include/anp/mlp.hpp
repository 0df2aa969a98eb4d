// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "anp/autodiff.hpp"
#include "anp/rng.hpp"
#include "anp/tensor.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace anp {

/// Every trainable tensor of a model, keyed by a slash-separated name.
/// Ordered so iteration (and therefore serialization and optimizer updates)
/// is deterministic.
using ParamStore = std::map<std::string, Tensor>;

/// Binds a ParamStore into one Graph. Leaves are created on first use, so a
/// forward pass only records the parameters it touches.
class Params {
 public:
  Params(Graph& graph, const ParamStore& store, bool trainable = true)
      : graph_(&graph), store_(&store), trainable_(trainable) {}

  /// Throws std::out_of_range naming the key when it is absent.
  Var operator()(const std::string& name);

  Graph& graph() { return *graph_; }
  const ParamStore& store() const { return *store_; }

  /// Gradient for every stored tensor after graph().backward(); zeros for
  /// parameters the forward pass never touched.
  ParamStore gradients() const;

 private:
  Graph* graph_;
  const ParamStore* store_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

/// Glorot-uniform weights [in, out] and zero biases [out] under
/// `<prefix>/l<i>/w` and `<prefix>/l<i>/b`.
void init_mlp(ParamStore& store, const std::string& prefix, std::size_t in_width,
              std::span<const std::size_t> layer_widths, Rng& rng);

/// ReLU between layers, affine final layer. Rows are independent.
Var forward_mlp(Params& params, const std::string& prefix, Var input,
                std::span<const std::size_t> layer_widths);

Var linear(Params& params, const std::string& prefix, Var input);

}  // namespace anp
