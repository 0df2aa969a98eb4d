// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Neural process with a deterministic path and a global latent path. With
// uniform cross-attention and no self-attention it is the plain NP; any other
// attention kind gives the attentive variant.
//
//   deterministic:  pair MLP(x_i, y_i) -> [self-attention] -> cross-attention
//                   with queries embed(x_T), keys embed(x_C)      -> r_* [m, d]
//   latent:         pair MLP(x_i, y_i) -> [self-attention] -> mean -> head MLP
//                   -> (mu_z, omega_z), sigma_z = 0.1 + 0.9 sigmoid(omega_z)
//   decoder:        MLP(x_i, r_*i, z) -> (mu_y, omega_y),
//                   sigma_y = 0.1 + 0.9 softplus(omega_y)
//
// embed() is a learned MLP for dot-product and multihead attention and the
// identity for Laplace attention.

#pragma once

#include "anp/attention.hpp"
#include "anp/autodiff.hpp"
#include "anp/episode.hpp"
#include "anp/mlp.hpp"
#include "anp/rng.hpp"

#include <span>
#include <string>
#include <vector>

namespace anp {

struct ModelConfig {
  std::size_t x_dim = 1;
  std::size_t y_dim = 1;
  std::size_t width = 128;  // d: hidden width of every MLP and size of r and z
  AttentionKind attention = AttentionKind::MultiHead;
  std::size_t heads = 8;
  std::size_t self_attention_layers = 0;
  std::size_t det_pair_layers = 4;
  std::size_t latent_pair_layers = 3;
  std::size_t latent_head_layers = 2;
  std::size_t key_layers = 2;
  std::size_t decoder_hidden_layers = 3;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;
};

/// Diagonal Gaussian over z, rows of shape [1, d].
struct LatentDistribution {
  Var mean;
  Var stddev;
};

/// Factorized Gaussian over targets, [m, d_y] each.
struct PredictiveDistribution {
  Var mean;
  Var stddev;
};

/// Evaluated predictive distribution.
struct Prediction {
  Tensor mean;    // [m, d_y]
  Tensor stddev;  // [m, d_y]
};

struct ElboTerms {
  double loss = 0.0;
  double recon_nll = 0.0;  // mean over targets and output dims
  double kl = 0.0;         // unnormalized KL(q(z|s_T) || q(z|s_C))
};

class NeuralProcess {
 public:
  explicit NeuralProcess(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  ParamStore init_params(Rng& rng) const;
  /// Throws std::invalid_argument naming the first missing or misshapen tensor.
  void check_params(const ParamStore& params) const;

  /// Query-specific representation r_* for every target input. Needs n >= 1.
  Var encode_deterministic(Params& params, Var x_context, Var y_context, Var x_target,
                           AttentionTrace* trace = nullptr) const;

  /// q(z | s) for a set of pairs; the standard normal prior for an empty set.
  LatentDistribution encode_latent(Params& params, Var x, Var y) const;

  PredictiveDistribution decode(Params& params, Var x_target, Var representation, Var z) const;

  /// Negative one-sample ELBO for one episode:
  ///   gaussian_nll(y_T | z ~ q(z|s_T)) + KL(q(z|s_T) || q(z|s_C)) / m.
  /// `noise` holds d standard-normal draws. Needs n >= 1.
  Var elbo_loss(Params& params, const Episode& episode, std::span<const double> noise,
                ElboTerms* terms = nullptr) const;

  /// Mean of elbo_loss over a batch; `noise` holds d draws per episode.
  Var batch_loss(Params& params, std::span<const Episode> batch, std::span<const double> noise,
                 std::vector<ElboTerms>* terms = nullptr) const;

  /// Predictive distribution for one latent draw. An empty context uses r_empty
  /// for every r_* row and the prior for z.
  Prediction predict_with_noise(const ParamStore& params, const Tensor& x_context,
                                const Tensor& y_context, const Tensor& x_target,
                                std::span<const double> noise) const;

  /// One prediction per latent sample z ~ q(z | s_C), noise drawn from rng.
  std::vector<Prediction> predict(const ParamStore& params, const Tensor& x_context,
                                  const Tensor& y_context, const Tensor& x_target,
                                  std::size_t z_samples, Rng& rng) const;

 private:
  Var embed(Params& params, Var x) const;
  Var pair_representations(Params& params, const std::string& path, Var x, Var y,
                           std::size_t layers) const;
  LatentDistribution latent_head(Params& params, Var summary) const;
  PredictiveDistribution decode_impl(Params& params, Var x_target, Var representation, Var z) const;

  ModelConfig config_;
  std::vector<std::size_t> det_widths_;
  std::vector<std::size_t> latent_widths_;
  std::vector<std::size_t> head_widths_;
  std::vector<std::size_t> key_widths_;
  std::vector<std::size_t> decoder_widths_;
};

/// z = mu + sigma * noise, differentiable in mu and sigma.
Var sample_latent(const LatentDistribution& dist, Var noise);

/// Mean over all elements of -log N(y | mu, sigma^2). Throws std::domain_error
/// when any sigma <= 0.
Var gaussian_nll(Var y, Var mean, Var stddev);
double gaussian_nll(const Tensor& y, const Tensor& mean, const Tensor& stddev);

/// Closed-form KL(q1 || q2) between diagonal Gaussians, summed over dimensions.
Var kl_diag_gaussians(const LatentDistribution& q1, const LatentDistribution& q2);

}  // namespace anp
