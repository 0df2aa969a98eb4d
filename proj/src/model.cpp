// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace anp {

namespace {

constexpr double kMinStddev = 0.1;
constexpr double kStddevRange = 0.9;

std::vector<std::size_t> repeated(std::size_t width, std::size_t count) {
  return std::vector<std::size_t>(count, width);
}

Var bounded_sigmoid(Var omega) { return add_scalar(scale(sigmoid(omega), kStddevRange), kMinStddev); }
Var bounded_softplus(Var omega) { return add_scalar(scale(softplus(omega), kStddevRange), kMinStddev); }

void require_matrix(const char* what, const Tensor& t, std::size_t cols) {
  if (t.rank() != 2 || t.dim(1) != cols) {
    throw ShapeError(std::string(what) + ": expected shape [*, " + std::to_string(cols) + "], got " +
                     shape_str(t.shape()));
  }
}

}  // namespace

void ModelConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (x_dim == 0) fail("x_dim must be positive");
  if (y_dim == 0) fail("y_dim must be positive");
  if (width == 0) fail("width must be positive");
  if (det_pair_layers == 0 || latent_pair_layers == 0 || latent_head_layers == 0 ||
      key_layers == 0 || decoder_hidden_layers == 0) {
    fail("every MLP needs at least one layer");
  }
  const bool needs_heads = attention == AttentionKind::MultiHead || self_attention_layers > 0;
  if (needs_heads && (heads == 0 || width % heads != 0)) {
    fail(std::to_string(heads) + " heads do not divide width " + std::to_string(width));
  }
}

NeuralProcess::NeuralProcess(ModelConfig config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.width;
  det_widths_ = repeated(d, config_.det_pair_layers);
  latent_widths_ = repeated(d, config_.latent_pair_layers);
  head_widths_ = repeated(d, config_.latent_head_layers - 1);
  head_widths_.push_back(2 * d);
  key_widths_ = repeated(d, config_.key_layers);
  decoder_widths_ = repeated(d, config_.decoder_hidden_layers);
  decoder_widths_.push_back(2 * config_.y_dim);
}

ParamStore NeuralProcess::init_params(Rng& rng) const {
  const ModelConfig& c = config_;
  const std::size_t d = c.width;
  ParamStore store;
  init_mlp(store, "det/pair", c.x_dim + c.y_dim, det_widths_, rng);
  init_mlp(store, "lat/pair", c.x_dim + c.y_dim, latent_widths_, rng);
  init_mlp(store, "lat/head", d, head_widths_, rng);
  init_mlp(store, "dec", c.x_dim + 2 * d, decoder_widths_, rng);
  if (c.attention == AttentionKind::DotProduct || c.attention == AttentionKind::MultiHead) {
    init_mlp(store, "key", c.x_dim, key_widths_, rng);
  }
  if (c.attention == AttentionKind::MultiHead) {
    init_multihead(store, "det/cross", {d, d, d, d, c.heads}, rng);
  }
  if (c.self_attention_layers > 0) {
    init_self_attention_stack(store, "det/self", d, c.heads, c.self_attention_layers, rng);
    init_self_attention_stack(store, "lat/self", d, c.heads, c.self_attention_layers, rng);
  }
  store["r_empty"] = Tensor(Shape{d}, 0.0);
  return store;
}

void NeuralProcess::check_params(const ParamStore& params) const {
  Rng rng(0);
  const ParamStore expected = init_params(rng);
  for (const auto& [name, tensor] : expected) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("parameters: missing '" + name + "'");
    if (it->second.shape() != tensor.shape()) {
      throw std::invalid_argument("parameters: '" + name + "' has shape " + shape_str(it->second.shape()) +
                                  ", expected " + shape_str(tensor.shape()));
    }
  }
  for (const auto& [name, tensor] : params) {
    if (!expected.count(name)) {
      throw std::invalid_argument("parameters: unexpected tensor '" + name + "' for this configuration");
    }
  }
}

Var NeuralProcess::embed(Params& params, Var x) const {
  if (config_.attention == AttentionKind::DotProduct || config_.attention == AttentionKind::MultiHead) {
    return forward_mlp(params, "key", x, key_widths_);
  }
  return x;
}

Var NeuralProcess::pair_representations(Params& params, const std::string& path, Var x, Var y,
                                        std::size_t layers) const {
  const auto& widths = path == "det" ? det_widths_ : latent_widths_;
  Var h = forward_mlp(params, path + "/pair", concat_cols({x, y}), widths);
  if (layers > 0) h = self_attention_stack(params, path + "/self", h, layers, config_.heads);
  return h;
}

namespace {

Var cross_attend(Params& params, const ModelConfig& c, Var queries, Var keys, Var values,
                 AttentionTrace* trace) {
  switch (c.attention) {
    case AttentionKind::Uniform:
      return uniform_attention(queries, keys, values, trace);
    case AttentionKind::Laplace:
      return laplace_attention(queries, keys, values, trace);
    case AttentionKind::DotProduct:
      return dot_product_attention(queries, keys, values, trace);
    case AttentionKind::MultiHead:
      return multihead_attention(params, "det/cross", c.heads, queries, keys, values, trace);
  }
  throw std::logic_error("unreachable attention kind");
}

}  // namespace

Var NeuralProcess::encode_deterministic(Params& params, Var x_context, Var y_context, Var x_target,
                                        AttentionTrace* trace) const {
  if (x_context.rows() == 0) {
    throw std::invalid_argument("encode_deterministic: empty context; the prior path uses r_empty");
  }
  Var values = pair_representations(params, "det", x_context, y_context, config_.self_attention_layers);
  if (config_.attention == AttentionKind::Uniform) {
    return uniform_attention(x_target, x_context, values, trace);
  }
  return cross_attend(params, config_, embed(params, x_target), embed(params, x_context), values, trace);
}

LatentDistribution NeuralProcess::latent_head(Params& params, Var summary) const {
  const std::size_t d = config_.width;
  Var out = forward_mlp(params, "lat/head", summary, head_widths_);
  return {slice_cols(out, 0, d), bounded_sigmoid(slice_cols(out, d, d))};
}

LatentDistribution NeuralProcess::encode_latent(Params& params, Var x, Var y) const {
  if (x.rows() == 0) {
    Graph& g = params.graph();
    const Shape s{1, config_.width};
    return {g.constant(Tensor(s, 0.0)), g.constant(Tensor(s, 1.0))};
  }
  Var pairs = pair_representations(params, "lat", x, y, config_.self_attention_layers);
  return latent_head(params, mean(pairs, 0));
}

PredictiveDistribution NeuralProcess::decode_impl(Params& params, Var x_target, Var representation,
                                                  Var z) const {
  const std::size_t dx = config_.x_dim;
  const std::size_t d = config_.width;
  // First layer on concat(x, r, z): the z block is computed once and broadcast
  // over the rows instead of materializing m copies of z.
  Var w0 = params("dec/l0/w");
  Var b0 = params("dec/l0/b");
  if (w0.rows() != dx + 2 * d) {
    throw ShapeError("decoder: weight 'dec/l0/w' has shape " + shape_str(w0.shape()) + ", expected [" +
                     std::to_string(dx + 2 * d) + ", *]");
  }
  Var h = matmul(concat_cols({x_target, representation}), slice_rows(w0, 0, dx + d));
  h = add(h, add(matmul(z, slice_rows(w0, dx + d, d)), b0));
  for (std::size_t i = 1; i < decoder_widths_.size(); ++i) {
    h = linear(params, "dec/l" + std::to_string(i), relu(h));
  }
  const std::size_t dy = config_.y_dim;
  return {slice_cols(h, 0, dy), bounded_softplus(slice_cols(h, dy, dy))};
}

PredictiveDistribution NeuralProcess::decode(Params& params, Var x_target, Var representation, Var z) const {
  if (representation.rows() != x_target.rows() || representation.cols() != config_.width) {
    throw ShapeError("decode: representation shape " + shape_str(representation.shape()) +
                     " does not match " + std::to_string(x_target.rows()) + " targets of width " +
                     std::to_string(config_.width));
  }
  if (z.value().size() != config_.width || z.rows() != 1) {
    throw ShapeError("decode: latent sample shape " + shape_str(z.shape()) + ", expected [1, " +
                     std::to_string(config_.width) + "]");
  }
  return decode_impl(params, x_target, representation, z);
}

Var sample_latent(const LatentDistribution& dist, Var noise) {
  return add(dist.mean, mul(dist.stddev, noise));
}

Var gaussian_nll(Var y, Var mean, Var stddev) {
  for (double s : stddev.value().values()) {
    if (!(s > 0.0)) throw std::domain_error("gaussian_nll: standard deviation must be positive");
  }
  Var standardized = div(sub(y, mean), stddev);
  Var per_point = add(log(stddev), scale(square(standardized), 0.5));
  return add_scalar(mean_all(per_point), 0.5 * std::log(2.0 * std::numbers::pi));
}

double gaussian_nll(const Tensor& y, const Tensor& mean, const Tensor& stddev) {
  Graph g;
  return gaussian_nll(g.constant(y), g.constant(mean), g.constant(stddev)).value().item();
}

Var kl_diag_gaussians(const LatentDistribution& q1, const LatentDistribution& q2) {
  if (q1.mean.value().size() != q2.mean.value().size()) {
    throw ShapeError("kl_diag_gaussians: dimensionalities differ, " + shape_str(q1.mean.shape()) +
                     " vs " + shape_str(q2.mean.shape()));
  }
  Var log_ratio = sub(log(q2.stddev), log(q1.stddev));
  Var numer = add(square(q1.stddev), square(sub(q1.mean, q2.mean)));
  Var quad = div(numer, scale(square(q2.stddev), 2.0));
  return sum_all(add_scalar(add(log_ratio, quad), -0.5));
}

Var NeuralProcess::elbo_loss(Params& params, const Episode& episode, std::span<const double> noise,
                             ElboTerms* terms) const {
  const ModelConfig& c = config_;
  const std::size_t n = episode.num_context();
  const std::size_t m = episode.num_target();
  if (n == 0) throw std::invalid_argument("elbo_loss: episode has no context points");
  if (noise.size() != c.width) {
    throw ShapeError("elbo_loss: expected " + std::to_string(c.width) + " noise draws, got " +
                     std::to_string(noise.size()));
  }
  require_matrix("elbo_loss x_target", episode.x_target, c.x_dim);
  require_matrix("elbo_loss y_target", episode.y_target, c.y_dim);
  Graph& g = params.graph();
  Var xt = g.constant(episode.x_target);
  Var yt = g.constant(episode.y_target);
  Var xc = g.constant(episode.x_context);
  Var yc = g.constant(episode.y_context);
  const std::span<const std::size_t> idx(episode.context_indices);

  // Deterministic path. Embeddings are row-wise, so context keys are the
  // context rows of the target embedding.
  Var values = pair_representations(params, "det", xc, yc, c.self_attention_layers);
  Var r;
  if (c.attention == AttentionKind::Uniform) {
    r = uniform_attention(xt, xc, values);
  } else {
    Var queries = embed(params, xt);
    r = cross_attend(params, c, queries, gather_rows(queries, idx), values, nullptr);
  }

  // Latent path. Without self-attention the context pair representations are
  // a subset of the target ones.
  LatentDistribution q_target;
  LatentDistribution q_context;
  if (c.self_attention_layers == 0) {
    Var pairs = pair_representations(params, "lat", xt, yt, 0);
    q_target = latent_head(params, mean(pairs, 0));
    q_context = latent_head(params, mean(gather_rows(pairs, idx), 0));
  } else {
    q_target = encode_latent(params, xt, yt);
    q_context = encode_latent(params, xc, yc);
  }

  Var eps = g.constant(Tensor(Shape{1, c.width}, std::vector<double>(noise.begin(), noise.end())));
  Var z = sample_latent(q_target, eps);
  PredictiveDistribution pred = decode_impl(params, xt, r, z);
  Var nll = gaussian_nll(yt, pred.mean, pred.stddev);
  Var kl = kl_diag_gaussians(q_target, q_context);
  Var loss = add(nll, scale(kl, 1.0 / static_cast<double>(m)));
  if (terms) {
    terms->loss = loss.value().item();
    terms->recon_nll = nll.value().item();
    terms->kl = kl.value().item();
  }
  return loss;
}

Var NeuralProcess::batch_loss(Params& params, std::span<const Episode> batch, std::span<const double> noise,
                              std::vector<ElboTerms>* terms) const {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  const std::size_t d = config_.width;
  if (noise.size() != batch.size() * d) {
    throw ShapeError("batch_loss: expected " + std::to_string(batch.size() * d) + " noise draws, got " +
                     std::to_string(noise.size()));
  }
  if (terms) terms->assign(batch.size(), ElboTerms{});
  Var total;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Var li = elbo_loss(params, batch[i], noise.subspan(i * d, d), terms ? &(*terms)[i] : nullptr);
    total = i == 0 ? li : add(total, li);
  }
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

Prediction NeuralProcess::predict_with_noise(const ParamStore& params, const Tensor& x_context,
                                             const Tensor& y_context, const Tensor& x_target,
                                             std::span<const double> noise) const {
  require_matrix("predict x_context", x_context, config_.x_dim);
  require_matrix("predict y_context", y_context, config_.y_dim);
  require_matrix("predict x_target", x_target, config_.x_dim);
  if (x_context.dim(0) != y_context.dim(0)) {
    throw ShapeError("predict: " + std::to_string(x_context.dim(0)) + " context inputs but " +
                     std::to_string(y_context.dim(0)) + " outputs");
  }
  if (noise.size() != config_.width) {
    throw ShapeError("predict: expected " + std::to_string(config_.width) + " noise draws, got " +
                     std::to_string(noise.size()));
  }
  Graph g;
  Params p(g, params, false);
  Var xc = g.constant(x_context);
  Var yc = g.constant(y_context);
  Var xt = g.constant(x_target);
  const std::size_t m = x_target.dim(0);
  Var r = x_context.dim(0) == 0 ? repeat_rows(p("r_empty"), m) : encode_deterministic(p, xc, yc, xt);
  LatentDistribution q = encode_latent(p, xc, yc);
  Var eps = g.constant(Tensor(Shape{1, config_.width}, std::vector<double>(noise.begin(), noise.end())));
  PredictiveDistribution pred = decode_impl(p, xt, r, sample_latent(q, eps));
  return {pred.mean.value(), pred.stddev.value()};
}

std::vector<Prediction> NeuralProcess::predict(const ParamStore& params, const Tensor& x_context,
                                               const Tensor& y_context, const Tensor& x_target,
                                               std::size_t z_samples, Rng& rng) const {
  require_matrix("predict x_context", x_context, config_.x_dim);
  require_matrix("predict y_context", y_context, config_.y_dim);
  require_matrix("predict x_target", x_target, config_.x_dim);
  if (x_context.dim(0) != y_context.dim(0)) {
    throw ShapeError("predict: " + std::to_string(x_context.dim(0)) + " context inputs but " +
                     std::to_string(y_context.dim(0)) + " outputs");
  }
  Graph g;
  Params p(g, params, false);
  Var xc = g.constant(x_context);
  Var yc = g.constant(y_context);
  Var xt = g.constant(x_target);
  const std::size_t m = x_target.dim(0);
  Var r = x_context.dim(0) == 0 ? repeat_rows(p("r_empty"), m) : encode_deterministic(p, xc, yc, xt);
  LatentDistribution q = encode_latent(p, xc, yc);
  std::vector<Prediction> out;
  out.reserve(z_samples);
  for (std::size_t s = 0; s < z_samples; ++s) {
    Var eps = g.constant(Tensor(Shape{1, config_.width}, rng.normals(config_.width)));
    PredictiveDistribution pred = decode_impl(p, xt, r, sample_latent(q, eps));
    out.push_back({pred.mean.value(), pred.stddev.value()});
  }
  return out;
}

}  // namespace anp
