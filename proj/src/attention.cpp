// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace anp {

std::string to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::Uniform:
      return "uniform";
    case AttentionKind::Laplace:
      return "laplace";
    case AttentionKind::DotProduct:
      return "dot";
    case AttentionKind::MultiHead:
      return "multihead";
  }
  return "unknown";
}

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "uniform") return AttentionKind::Uniform;
  if (name == "laplace") return AttentionKind::Laplace;
  if (name == "dot" || name == "dot_product") return AttentionKind::DotProduct;
  if (name == "multihead") return AttentionKind::MultiHead;
  throw std::invalid_argument("unknown attention kind '" + name +
                              "' (expected uniform, laplace, dot or multihead)");
}

namespace {

void check_kv(const char* op, Var keys, Var values) {
  if (keys.rows() == 0) throw std::invalid_argument(std::string(op) + ": no key/value pairs");
  if (keys.rows() != values.rows()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(keys.rows()) + " keys but " +
                     std::to_string(values.rows()) + " values");
  }
}

void check_qk(const char* op, Var queries, Var keys) {
  if (queries.cols() != keys.cols()) {
    throw ShapeError(std::string(op) + ": query shape " + shape_str(queries.shape()) +
                     " and key shape " + shape_str(keys.shape()) + " differ in width");
  }
}

Var weighted_values(Var weights, Var values, AttentionTrace* trace) {
  if (trace) trace->weights.push_back(weights.value());
  return matmul(weights, values);
}

}  // namespace

Var uniform_attention(Var queries, Var keys, Var values, AttentionTrace* trace) {
  check_kv("uniform_attention", keys, values);
  if (trace) {
    trace->weights.emplace_back(Shape{queries.rows(), keys.rows()},
                                1.0 / static_cast<double>(keys.rows()));
  }
  return repeat_rows(mean(values, 0), queries.rows());
}

Var laplace_attention(Var queries, Var keys, Var values, AttentionTrace* trace) {
  check_kv("laplace_attention", keys, values);
  check_qk("laplace_attention", queries, keys);
  Var weights = softmax_rows(neg(l1_distance(queries, keys)));
  return weighted_values(weights, values, trace);
}

Var dot_product_attention(Var queries, Var keys, Var values, AttentionTrace* trace) {
  check_kv("dot_product_attention", keys, values);
  check_qk("dot_product_attention", queries, keys);
  const double s = 1.0 / std::sqrt(static_cast<double>(keys.cols()));
  Var weights = softmax_rows(scale(matmul(queries, keys, false, true), s));
  return weighted_values(weights, values, trace);
}

void validate(const MultiheadShape& shape) {
  if (shape.heads == 0 || shape.model_width % shape.heads != 0) {
    throw std::invalid_argument("multihead: " + std::to_string(shape.heads) +
                                " heads do not divide width " + std::to_string(shape.model_width));
  }
}

void init_multihead(ParamStore& store, const std::string& prefix, const MultiheadShape& shape, Rng& rng) {
  validate(shape);
  const auto glorot = [&rng](std::size_t in, std::size_t out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w(Shape{in, out});
    for (double& v : w.values()) v = rng.uniform(-limit, limit);
    return w;
  };
  store[prefix + "/wq"] = glorot(shape.key_width, shape.model_width);
  store[prefix + "/wk"] = glorot(shape.key_width, shape.model_width);
  store[prefix + "/wv"] = glorot(shape.value_width, shape.model_width);
  store[prefix + "/wo"] = glorot(shape.model_width, shape.out_width);
}

Var multihead_attention(Params& params, const std::string& prefix, std::size_t heads, Var queries,
                        Var keys, Var values, AttentionTrace* trace) {
  check_kv("multihead_attention", keys, values);
  check_qk("multihead_attention", queries, keys);
  Var wq = params(prefix + "/wq");
  Var wk = params(prefix + "/wk");
  Var wv = params(prefix + "/wv");
  Var wo = params(prefix + "/wo");
  const std::size_t width = wq.cols();
  validate({queries.cols(), values.cols(), width, wo.cols(), heads});
  if (wk.cols() != width || wv.cols() != width || wo.rows() != width) {
    throw ShapeError("multihead_attention '" + prefix + "': inconsistent projection shapes " +
                     shape_str(wq.shape()) + ", " + shape_str(wk.shape()) + ", " +
                     shape_str(wv.shape()) + ", " + shape_str(wo.shape()));
  }
  Var q = matmul(queries, wq);
  Var k = matmul(keys, wk);
  Var v = matmul(values, wv);
  if (heads == 1) return matmul(dot_product_attention(q, k, v, trace), wo);
  const std::size_t head_width = width / heads;
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t begin = h * head_width;
    outs.push_back(dot_product_attention(slice_cols(q, begin, head_width), slice_cols(k, begin, head_width),
                                         slice_cols(v, begin, head_width), trace));
  }
  return matmul(concat_cols(outs), wo);
}

void init_self_attention_stack(ParamStore& store, const std::string& prefix, std::size_t width,
                               std::size_t heads, std::size_t layers, Rng& rng) {
  const std::vector<std::size_t> ff{width, width};
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string layer = prefix + "/l" + std::to_string(i);
    init_multihead(store, layer + "/attn", {width, width, width, width, heads}, rng);
    init_mlp(store, layer + "/ff", width, ff, rng);
  }
}

Var self_attention_stack(Params& params, const std::string& prefix, Var x, std::size_t layers,
                         std::size_t heads) {
  const std::vector<std::size_t> ff{x.cols(), x.cols()};
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string layer = prefix + "/l" + std::to_string(i);
    Var h = add(x, multihead_attention(params, layer + "/attn", heads, x, x, x));
    x = add(h, forward_mlp(params, layer + "/ff", h, ff));
  }
  return x;
}

}  // namespace anp
