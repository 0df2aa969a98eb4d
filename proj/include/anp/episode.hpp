// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "anp/tensor.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace anp {

/// One realization of a process split into contexts and targets, C subset of T.
/// Row i of the context arrays is row context_indices[i] of the target arrays.
struct Episode {
  Tensor x_context;  // [n, d_x]
  Tensor y_context;  // [n, d_y]
  Tensor x_target;   // [m, d_x]
  Tensor y_target;   // [m, d_y]
  std::vector<std::size_t> context_indices;

  std::size_t num_context() const { return x_context.rank() == 2 ? x_context.dim(0) : 0; }
  std::size_t num_target() const { return x_target.rank() == 2 ? x_target.dim(0) : 0; }
  std::size_t x_dim() const { return x_target.cols(); }
  std::size_t y_dim() const { return y_target.cols(); }
};

/// Assemble an episode from target arrays and the context row indices.
Episode make_episode(Tensor x_target, Tensor y_target, std::vector<std::size_t> context_indices);

/// Throws std::invalid_argument when shapes disagree, m = 0, or a context row
/// is not the indexed target row.
void validate(const Episode& episode);

/// Rows `indices` of a rank-2 tensor.
Tensor take_rows(const Tensor& t, const std::vector<std::size_t>& indices);

}  // namespace anp
