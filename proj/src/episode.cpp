// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/episode.hpp"

#include <algorithm>
#include <stdexcept>

namespace anp {

Tensor take_rows(const Tensor& t, const std::vector<std::size_t>& indices) {
  const std::size_t cols = t.cols();
  Tensor out(Shape{indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= t.rows()) {
      throw std::out_of_range("take_rows: index " + std::to_string(indices[i]) + " out of range for " +
                              std::to_string(t.rows()) + " rows");
    }
    std::copy_n(t.data() + indices[i] * cols, cols, out.data() + i * cols);
  }
  return out;
}

Episode make_episode(Tensor x_target, Tensor y_target, std::vector<std::size_t> context_indices) {
  Episode e;
  e.x_context = take_rows(x_target, context_indices);
  e.y_context = take_rows(y_target, context_indices);
  e.x_target = std::move(x_target);
  e.y_target = std::move(y_target);
  e.context_indices = std::move(context_indices);
  return e;
}

void validate(const Episode& e) {
  const auto fail = [](const std::string& what) { throw std::invalid_argument("episode: " + what); };
  if (e.x_target.rank() != 2 || e.y_target.rank() != 2 || e.x_context.rank() != 2 ||
      e.y_context.rank() != 2) {
    fail("all arrays must be rank 2");
  }
  const std::size_t m = e.x_target.dim(0);
  const std::size_t n = e.x_context.dim(0);
  if (m == 0) fail("target set is empty");
  if (e.y_target.dim(0) != m) fail("x_target and y_target row counts differ");
  if (e.y_context.dim(0) != n) fail("x_context and y_context row counts differ");
  if (e.x_context.dim(1) != e.x_target.dim(1) || e.y_context.dim(1) != e.y_target.dim(1)) {
    fail("context and target widths differ");
  }
  if (e.context_indices.size() != n) fail("context_indices length differs from context count");
  const std::size_t dx = e.x_target.dim(1);
  const std::size_t dy = e.y_target.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = e.context_indices[i];
    if (t >= m) fail("context index " + std::to_string(t) + " out of range");
    for (std::size_t c = 0; c < dx; ++c) {
      if (e.x_context(i, c) != e.x_target(t, c)) fail("context row " + std::to_string(i) + " is not a target row");
    }
    for (std::size_t c = 0; c < dy; ++c) {
      if (e.y_context(i, c) != e.y_target(t, c)) fail("context row " + std::to_string(i) + " is not a target row");
    }
  }
}

}  // namespace anp
