// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Cross- and self-attention. All functions take (queries, keys, values) with
// queries [m, d_k], keys [n, d_k], values [n, d_v] and return [m, d_v].

#pragma once

#include "anp/autodiff.hpp"
#include "anp/mlp.hpp"

#include <string>
#include <vector>

namespace anp {

enum class AttentionKind { Uniform, Laplace, DotProduct, MultiHead };

std::string to_string(AttentionKind kind);
/// Accepts "uniform", "laplace", "dot" / "dot_product", "multihead".
AttentionKind parse_attention_kind(const std::string& name);

/// Receives the softmax weight matrix [m, n] of every head evaluated.
struct AttentionTrace {
  std::vector<Tensor> weights;
};

/// Every query receives the column mean of `values`; queries and keys are ignored.
Var uniform_attention(Var queries, Var keys, Var values, AttentionTrace* trace = nullptr);

/// Weights softmax(-||q_i - k_j||_1) over j.
Var laplace_attention(Var queries, Var keys, Var values, AttentionTrace* trace = nullptr);

/// softmax(Q K^T / sqrt(d_k)) V.
Var dot_product_attention(Var queries, Var keys, Var values, AttentionTrace* trace = nullptr);

/// Projection layout under `prefix`:
///   wq [d_k, d], wk [d_k, d], wv [d_v, d], wo [d, d_out]
/// Head h owns columns [h*d/H, (h+1)*d/H) of wq, wk and wv.
struct MultiheadShape {
  std::size_t key_width;    // d_k
  std::size_t value_width;  // d_v
  std::size_t model_width;  // d
  std::size_t out_width;    // d_out
  std::size_t heads;        // H, must divide d
};

/// Throws std::invalid_argument when heads is 0 or does not divide model_width.
void validate(const MultiheadShape& shape);
void init_multihead(ParamStore& store, const std::string& prefix, const MultiheadShape& shape, Rng& rng);

/// concat_h DotProduct(Q W^Q_h, K W^K_h, V W^V_h) W^O.
Var multihead_attention(Params& params, const std::string& prefix, std::size_t heads, Var queries,
                        Var keys, Var values, AttentionTrace* trace = nullptr);

/// Each layer: h = x + MultiHead(x, x, x); out = h + MLP(h), MLP = [d -> d relu -> d].
void init_self_attention_stack(ParamStore& store, const std::string& prefix, std::size_t width,
                               std::size_t heads, std::size_t layers, Rng& rng);
Var self_attention_stack(Params& params, const std::string& prefix, Var x, std::size_t layers,
                         std::size_t heads);

}  // namespace anp
