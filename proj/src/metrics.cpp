// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace anp {

namespace {

EpisodeNll split_nll(const Episode& e, const Tensor& mean, const Tensor& stddev) {
  EpisodeNll out;
  out.target = gaussian_nll(e.y_target, mean, stddev);
  out.context = gaussian_nll(e.y_context, take_rows(mean, e.context_indices), take_rows(stddev, e.context_indices));
  return out;
}

}  // namespace

EpisodeNll episode_nll(const NeuralProcess& model, const ParamStore& params, const Episode& episode, Rng& rng) {
  if (episode.num_context() == 0) throw std::invalid_argument("episode_nll: empty context");
  const std::vector<double> noise = rng.normals(model.config().width);
  const Prediction p =
      model.predict_with_noise(params, episode.x_context, episode.y_context, episode.x_target, noise);
  return split_nll(episode, p.mean, p.stddev);
}

double context_reconstruction_nll(const NeuralProcess& model, const ParamStore& params, const Episode& episode,
                                  Rng& rng) {
  return episode_nll(model, params, episode, rng).context;
}

double target_nll(const NeuralProcess& model, const ParamStore& params, const Episode& episode, Rng& rng) {
  return episode_nll(model, params, episode, rng).target;
}

EpisodeNll oracle_nll(const GPHyperparams& hyp, const Episode& episode) {
  const GPPosterior post = gp_posterior(hyp, episode.x_context, episode.y_context, episode.x_target);
  return split_nll(episode, post.mean, observation_stddev(post, hyp));
}

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stderr_ = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  }
  return out;
}

}  // namespace anp
