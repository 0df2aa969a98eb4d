// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/bo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace anp {

namespace {

std::string num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

double BOProblem::minimum() const {
  const auto vals = values.values();
  return *std::min_element(vals.begin(), vals.end());
}

Tensor bo_grid(std::size_t points, double lo, double hi) {
  if (points < 2) throw std::invalid_argument("bo_grid: need at least 2 points");
  Tensor g(Shape{points, 1});
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

BOProblem sample_bo_problem(const GPHyperparams& hyp, Rng& rng, std::size_t points) {
  BOProblem p;
  p.grid = bo_grid(points);
  p.values = sample_curve(hyp, p.grid, rng);
  return p;
}

Surrogate model_surrogate(const NeuralProcess& model, const ParamStore& params) {
  return [&model, &params](const Tensor& xo, const Tensor& yo, const Tensor& grid, Rng& rng) {
    return model.predict(params, xo, yo, grid, 1, rng).front().mean;
  };
}

Surrogate oracle_surrogate(const GPHyperparams& hyp) {
  return [hyp](const Tensor& xo, const Tensor& yo, const Tensor& grid, Rng& rng) {
    return gp_posterior_sample(hyp, xo, yo, grid, rng);
  };
}

BOTrace thompson_bo(const BOProblem& problem, std::size_t iterations, const Surrogate& surrogate, Rng& rng) {
  const std::size_t k = problem.grid.dim(0);
  const double true_min = problem.minimum();
  BOTrace trace;
  double best = INFINITY;
  double cumulative = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    std::size_t idx = 0;
    if (it == 0) {
      idx = rng.uniform_int(0, k - 1);
    } else {
      const std::size_t n = trace.x.size();
      Tensor xo(Shape{n, 1}, trace.x);
      Tensor yo(Shape{n, 1}, trace.y);
      const Tensor f = surrogate(xo, yo, problem.grid, rng);
      const auto vals = f.values();
      idx = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    }
    const double y = problem.values[idx];
    best = std::min(best, y);
    const double regret = best - true_min;
    cumulative += regret;
    trace.grid_index.push_back(idx);
    trace.x.push_back(problem.grid[idx]);
    trace.y.push_back(y);
    trace.simple_regret.push_back(regret);
    trace.cumulative_regret.push_back(cumulative);
  }
  return trace;
}

void check_trace(const BOTrace& t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < t.simple_regret.size(); ++i) {
    const double r = t.simple_regret[i];
    if (!(r >= 0.0)) throw std::logic_error("bo trace: negative simple regret at iteration " + std::to_string(i + 1));
    if (i > 0 && r > t.simple_regret[i - 1]) {
      throw std::logic_error("bo trace: simple regret increased at iteration " + std::to_string(i + 1));
    }
    sum += r;
    if (t.cumulative_regret[i] != sum) {
      throw std::logic_error("bo trace: cumulative regret is not the prefix sum at iteration " +
                             std::to_string(i + 1));
    }
  }
}

void write_bo_rows(std::ostream& out, std::size_t function_id, const BOTrace& t) {
  for (std::size_t i = 0; i < t.x.size(); ++i) {
    out << function_id << "," << (i + 1) << "," << num(t.x[i]) << "," << num(t.y[i]) << ","
        << num(t.simple_regret[i]) << "," << num(t.cumulative_regret[i]) << "\n";
  }
}

}  // namespace anp
