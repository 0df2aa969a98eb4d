// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Negative log-likelihood metrics, lower is better. Both use a single latent
// draw z ~ q(z | s_C).

#pragma once

#include "anp/episode.hpp"
#include "anp/gp.hpp"
#include "anp/model.hpp"
#include "anp/rng.hpp"

namespace anp {

struct EpisodeNll {
  double context = 0.0;  // mean over i in C of -log p(y_i | x_i, C)
  double target = 0.0;   // mean over i in T
};

/// Both metrics from one prediction over x_T, so they share z. Throws
/// std::invalid_argument for an empty context.
EpisodeNll episode_nll(const NeuralProcess& model, const ParamStore& params, const Episode& episode, Rng& rng);

double context_reconstruction_nll(const NeuralProcess& model, const ParamStore& params, const Episode& episode,
                                  Rng& rng);
double target_nll(const NeuralProcess& model, const ParamStore& params, const Episode& episode, Rng& rng);

/// The same metrics under the exact GP posterior predictive.
EpisodeNll oracle_nll(const GPHyperparams& hyp, const Episode& episode);

/// Mean and standard error of a sample.
struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};
MeanStderr mean_stderr(const std::vector<double>& values);

}  // namespace anp
