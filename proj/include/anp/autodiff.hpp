// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode differentiation over dense tensors.
//
// A Graph records every primitive applied to its Vars in creation order, so
// the node list is already topologically sorted. backward() walks it once in
// reverse. Graphs are cheap and meant to be rebuilt for every training step.

#pragma once

#include "anp/tensor.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace anp {

class Graph;

/// Raised when finite-value checking is on and an operation produces NaN or Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Handle to a node of a Graph. Trivially copyable; valid while the graph lives.
class Var {
 public:
  Var() = default;

  Graph* graph() const { return graph_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

class Graph {
 public:
  // Receives the adjoint of the node and the node's own forward value.
  using BackwardFn = std::function<void(Graph&, const Tensor& grad_out, const Tensor& out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is collected by backward().
  Var parameter(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Check every recorded value for NaN or Inf. On by default in debug builds.
  void set_check_finite(bool on) { check_finite_ = on; }
  bool check_finite() const { return check_finite_; }
  std::size_t size() const { return nodes_.size(); }

  /// Accumulated adjoint of v after backward(); zeros when nothing reached it.
  Tensor grad(Var v) const;

  /// Reverse sweep from a scalar loss. Every node at or before the loss is
  /// visited exactly once, last-recorded first.
  void backward(Var loss);

  // Used by primitive implementations.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn);
  void accumulate(Var v, Tensor g);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
#ifdef NDEBUG
  bool check_finite_ = false;
#else
  bool check_finite_ = true;
#endif
};

// ---------------------------------------------------------------------------
// Primitives. Every binary elementwise op broadcasts numpy-style over the
// trailing axes of rank <= 2 operands.

/// a @ b with optional transposes of either operand.
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var neg(Var a);

Var relu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);

/// Row-wise softmax of a matrix, max-subtracted.
Var softmax_rows(Var a);

/// Reductions over one axis of a rank-2 view; the reduced axis is kept with extent 1.
Var sum(Var a, int axis);
Var mean(Var a, int axis);
Var sum_all(Var a);
Var mean_all(Var a);

/// Concatenate matrices along the last axis. All parts share the row count.
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
/// Stack matrices vertically. All parts share the column count.
Var concat_rows(std::span<const Var> parts);

/// out[i, j] = sum_k |q[i, k] - k[j, k]|.
Var l1_distance(Var queries, Var keys);

Var gather_rows(Var a, std::span<const std::size_t> indices);
/// Tile a single-row matrix (or vector) into `count` identical rows.
Var repeat_rows(Var row, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var reshape(Var a, Shape shape);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace anp
