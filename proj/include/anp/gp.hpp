// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Squared-exponential Gaussian-process curves over 1D inputs: a sampler for
// training episodes and the exact posterior used as an oracle.

#pragma once

#include "anp/episode.hpp"
#include "anp/rng.hpp"
#include "anp/tensor.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace anp {

struct GPHyperparams {
  double length_scale = 0.6;  // l, x-units
  double signal_scale = 1.0;  // sigma_f, y-units
  double noise_std = 0.02;    // sigma_n, y-units

  void validate() const;
};

/// Raised when a covariance matrix stays indefinite after the largest jitter.
class CholeskyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// k(x, x') = sigma_f^2 exp(-(x - x')^2 / (2 l^2)) for inputs [a, 1] and [b, 1].
Tensor se_kernel(const Tensor& xs1, const Tensor& xs2, const GPHyperparams& hyp);

/// Lower Cholesky factor of a symmetric matrix. Tries the matrix as given,
/// then adds 1e-10, 1e-9, ..., 1e-4 to the diagonal before failing.
RowMatrix cholesky_with_jitter(const RowMatrix& cov);

/// y ~ N(0, K + sigma_n^2 I) at inputs [k, 1].
Tensor sample_curve(const GPHyperparams& hyp, const Tensor& xs, Rng& rng);

enum class HyperMode { Fixed, Random };

struct EpisodeSpec {
  std::size_t min_context = 3;
  std::size_t max_points = 100;
  double x_min = -2.0;
  double x_max = 2.0;
  HyperMode mode = HyperMode::Fixed;
  GPHyperparams fixed{};
  double length_scale_min = 0.1;
  double length_scale_max = 0.6;
  double signal_scale_min = 0.1;
  double signal_scale_max = 1.0;

  void validate() const;
};

struct GPEpisode {
  Episode episode;
  GPHyperparams hyperparams;
};

/// n ~ U{min_context..max_points}, m ~ n + U{0..max_points - n}, m inputs
/// uniform on [x_min, x_max], one curve over them; the first n targets are the
/// contexts (inputs are i.i.d., so this is a uniformly random subset).
GPEpisode sample_episode(const EpisodeSpec& spec, Rng& rng);

struct GPPosterior {
  Tensor mean;      // [q, 1]
  Tensor variance;  // [q, 1], latent function variance (no observation noise)
};

/// Exact posterior with sigma_n^2 on the context diagonal.
GPPosterior gp_posterior(const GPHyperparams& hyp, const Tensor& x_context, const Tensor& y_context,
                         const Tensor& x_query);

/// Predictive standard deviation of a noisy observation: sqrt(var + sigma_n^2).
Tensor observation_stddev(const GPPosterior& posterior, const GPHyperparams& hyp);

/// One joint draw of the latent function at x_query from the posterior.
Tensor gp_posterior_sample(const GPHyperparams& hyp, const Tensor& x_context, const Tensor& y_context,
                           const Tensor& x_query, Rng& rng);

/// Self-describing JSON document with one record per episode.
std::string dump_episodes(std::span<const GPEpisode> episodes);
std::vector<GPEpisode> load_episodes(const std::string& json_text);

}  // namespace anp
