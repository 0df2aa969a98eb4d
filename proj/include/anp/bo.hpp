// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Thompson-sampling minimization of a function tabulated on a 1D grid.

#pragma once

#include "anp/gp.hpp"
#include "anp/model.hpp"
#include "anp/rng.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace anp {

struct BOProblem {
  Tensor grid;    // [k, 1]
  Tensor values;  // [k, 1]
  double minimum() const;
};

/// k evenly spaced points covering [lo, hi], both ends included.
Tensor bo_grid(std::size_t points = 256, double lo = -2.0, double hi = 2.0);

/// One GP curve over the grid.
BOProblem sample_bo_problem(const GPHyperparams& hyp, Rng& rng, std::size_t points = 256);

struct BOTrace {
  std::vector<std::size_t> grid_index;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> simple_regret;      // best observed y minus the grid minimum
  std::vector<double> cumulative_regret;  // prefix sums of simple_regret
};

/// Returns one sampled function over `grid` given the observations.
using Surrogate =
    std::function<Tensor(const Tensor& x_observed, const Tensor& y_observed, const Tensor& grid, Rng& rng)>;

/// Predictive mean of the model under one z ~ q(z | s_C).
Surrogate model_surrogate(const NeuralProcess& model, const ParamStore& params);
/// One joint draw from the exact GP posterior.
Surrogate oracle_surrogate(const GPHyperparams& hyp);

/// The first query is a uniformly random grid point; every later query is the
/// argmin of a surrogate draw conditioned on all evaluations so far. Repeat
/// queries are allowed.
BOTrace thompson_bo(const BOProblem& problem, std::size_t iterations, const Surrogate& surrogate, Rng& rng);

/// Throws std::logic_error when regrets are negative, increase, or the
/// cumulative column is not the prefix sum.
void check_trace(const BOTrace& trace);

constexpr const char* kBOHeader = "function_id,iteration,x_query,y_query,simple_regret,cumulative_regret";
void write_bo_rows(std::ostream& out, std::size_t function_id, const BOTrace& trace);

}  // namespace anp
