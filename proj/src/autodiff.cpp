// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace anp {

const Tensor& Var::value() const { return graph_->value(*this); }

// ---------------------------------------------------------------------------
// Graph

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::parameter(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::record(const char* op, Tensor value, std::initializer_list<Var> inputs,
                  BackwardFn fn) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Graph::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  if (check_finite_ && !value.all_finite()) {
    throw NonFiniteError(std::string(op) + ": produced a non-finite value, output shape " +
                         shape_str(value.shape()));
  }
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    if (v.graph() != this) {
      throw std::invalid_argument(std::string(op) + ": operand belongs to a different graph");
    }
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

void Graph::accumulate(Var v, Tensor g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (g.shape() != n.value.shape()) {
    throw ShapeError("backward: adjoint shape " + shape_str(g.shape()) +
                     " does not match value shape " + shape_str(n.value.shape()));
  }
  if (!n.has_grad) {
    n.grad = std::move(g);
    n.has_grad = true;
  } else {
    double* dst = n.grad.data();
    const double* src = g.data();
    for (std::size_t i = 0, e = g.size(); i < e; ++i) dst[i] += src[i];
  }
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

void Graph::backward(Var loss) {
  if (loss.graph() != this) throw std::invalid_argument("backward: loss belongs to a different graph");
  if (nodes_[loss.id()].value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     shape_str(nodes_[loss.id()].value.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  Node& root = nodes_[loss.id()];
  if (!root.requires_grad) return;
  root.grad = Tensor(root.value.shape(), 1.0);
  root.has_grad = true;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad, n.value);
  }
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

struct Extent {
  std::size_t rows;
  std::size_t cols;
};

Extent extent_of(const Shape& s) {
  switch (s.size()) {
    case 0:
      return {1, 1};
    case 1:
      return {1, s[0]};
    case 2:
      return {s[0], s[1]};
    default:
      throw ShapeError("operation supports rank <= 2, got shape " + shape_str(s));
  }
}

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  if (a.size() > 2 || b.size() > 2) {
    throw ShapeError(std::string(op) + ": rank > 2 operands " + shape_str(a) + " and " +
                     shape_str(b));
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea == eb || eb == 1) {
      out[i] = ea;
    } else if (ea == 1) {
      out[i] = eb;
    } else {
      throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                       " do not broadcast");
    }
  }
  return out;
}

template <class F>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, const Shape& out_shape, F f) {
  Tensor out(out_shape);
  const Extent eo = extent_of(out_shape);
  const Extent ea = extent_of(a.shape());
  const Extent eb = extent_of(b.shape());
  double* o = out.data();
  const double* pa = a.data();
  const double* pb = b.data();
  if (a.size() == out.size() && b.size() == out.size()) {
    for (std::size_t i = 0, n = out.size(); i < n; ++i) o[i] = f(pa[i], pb[i]);
    return out;
  }
  for (std::size_t r = 0; r < eo.rows; ++r) {
    const double* ra = pa + (ea.rows == 1 ? 0 : r * ea.cols);
    const double* rb = pb + (eb.rows == 1 ? 0 : r * eb.cols);
    double* ro = o + r * eo.cols;
    const bool a1 = ea.cols == 1;
    const bool b1 = eb.cols == 1;
    for (std::size_t c = 0; c < eo.cols; ++c) ro[c] = f(ra[a1 ? 0 : c], rb[b1 ? 0 : c]);
  }
  return out;
}

// Sum an adjoint over the axes along which `target` was broadcast.
Tensor reduce_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  const Extent eg = extent_of(g.shape());
  const Extent et = extent_of(target);
  Tensor out(target, 0.0);
  double* o = out.data();
  const double* pg = g.data();
  for (std::size_t r = 0; r < eg.rows; ++r) {
    const std::size_t tr = et.rows == 1 ? 0 : r;
    for (std::size_t c = 0; c < eg.cols; ++c) {
      const std::size_t tc = et.cols == 1 ? 0 : c;
      o[tr * et.cols + tc] += pg[r * eg.cols + c];
    }
  }
  return out;
}

template <class F>
Tensor map_values(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* pa = a.data();
  double* o = out.data();
  for (std::size_t i = 0, n = a.size(); i < n; ++i) o[i] = f(pa[i]);
  return out;
}

Graph& graph_of(const char* op, Var a) {
  if (!a.valid()) throw std::invalid_argument(std::string(op) + ": operand is not on a graph");
  return *a.graph();
}

Tensor as_shape(Tensor t, const Shape& shape) {
  if (t.shape() == shape) return t;
  return Tensor(shape, std::move(t.storage()));
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix product

Var matmul(Var a, Var b, bool ta, bool tb) {
  Graph& g = graph_of("matmul", a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Extent ea = extent_of(av.shape());
  const Extent eb = extent_of(bv.shape());
  const std::size_t m = ta ? ea.cols : ea.rows;
  const std::size_t ka = ta ? ea.rows : ea.cols;
  const std::size_t kb = tb ? eb.cols : eb.rows;
  const std::size_t n = tb ? eb.rows : eb.cols;
  if (ka != kb) {
    throw ShapeError(std::string("matmul: inner extents differ for shapes ") +
                     shape_str(av.shape()) + (ta ? "^T" : "") + " and " + shape_str(bv.shape()) +
                     (tb ? "^T" : ""));
  }
  Tensor out(Shape{m, n});
  auto A = av.matrix();
  auto B = bv.matrix();
  auto O = out.matrix();
  if (!ta && !tb) {
    O.noalias() = A * B;
  } else if (!ta && tb) {
    O.noalias() = A * B.transpose();
  } else if (ta && !tb) {
    O.noalias() = A.transpose() * B;
  } else {
    O.noalias() = A.transpose() * B.transpose();
  }
  return g.record("matmul", std::move(out), {a, b},
                  [a, b, ta, tb](Graph& gr, const Tensor& go, const Tensor&) {
                    auto G = go.matrix();
                    const Tensor& av = a.value();
                    const Tensor& bv = b.value();
                    auto A = av.matrix();
                    auto B = bv.matrix();
                    if (gr.requires_grad(a)) {
                      Tensor da(av.shape());
                      auto D = da.matrix();
                      if (!ta && !tb) {
                        D.noalias() = G * B.transpose();
                      } else if (!ta && tb) {
                        D.noalias() = G * B;
                      } else if (ta && !tb) {
                        D.noalias() = B * G.transpose();
                      } else {
                        D.noalias() = B.transpose() * G.transpose();
                      }
                      gr.accumulate(a, std::move(da));
                    }
                    if (gr.requires_grad(b)) {
                      Tensor db(bv.shape());
                      auto D = db.matrix();
                      if (!ta && !tb) {
                        D.noalias() = A.transpose() * G;
                      } else if (!ta && tb) {
                        D.noalias() = G.transpose() * A;
                      } else if (ta && !tb) {
                        D.noalias() = A * G;
                      } else {
                        D.noalias() = G.transpose() * A.transpose();
                      }
                      gr.accumulate(b, std::move(db));
                    }
                  });
}

// ---------------------------------------------------------------------------
// Elementwise binary

Var add(Var a, Var b) {
  Graph& g = graph_of("add", a);
  const Shape out = broadcast_shape("add", a.shape(), b.shape());
  Tensor v = broadcast_apply(a.value(), b.value(), out, [](double x, double y) { return x + y; });
  return g.record("add", std::move(v), {a, b}, [a, b](Graph& gr, const Tensor& go, const Tensor&) {
    if (gr.requires_grad(a)) gr.accumulate(a, reduce_to(go, a.shape()));
    if (gr.requires_grad(b)) gr.accumulate(b, reduce_to(go, b.shape()));
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of("sub", a);
  const Shape out = broadcast_shape("sub", a.shape(), b.shape());
  Tensor v = broadcast_apply(a.value(), b.value(), out, [](double x, double y) { return x - y; });
  return g.record("sub", std::move(v), {a, b}, [a, b](Graph& gr, const Tensor& go, const Tensor&) {
    if (gr.requires_grad(a)) gr.accumulate(a, reduce_to(go, a.shape()));
    if (gr.requires_grad(b)) {
      Tensor nb = map_values(go, [](double x) { return -x; });
      gr.accumulate(b, reduce_to(nb, b.shape()));
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of("mul", a);
  const Shape out = broadcast_shape("mul", a.shape(), b.shape());
  Tensor v = broadcast_apply(a.value(), b.value(), out, [](double x, double y) { return x * y; });
  return g.record("mul", std::move(v), {a, b}, [a, b](Graph& gr, const Tensor& go, const Tensor&) {
    const auto times = [](double x, double y) { return x * y; };
    if (gr.requires_grad(a)) {
      gr.accumulate(a, reduce_to(broadcast_apply(go, b.value(), go.shape(), times), a.shape()));
    }
    if (gr.requires_grad(b)) {
      gr.accumulate(b, reduce_to(broadcast_apply(go, a.value(), go.shape(), times), b.shape()));
    }
  });
}

Var div(Var a, Var b) {
  Graph& g = graph_of("div", a);
  const Shape out = broadcast_shape("div", a.shape(), b.shape());
  Tensor v = broadcast_apply(a.value(), b.value(), out, [](double x, double y) { return x / y; });
  return g.record("div", std::move(v), {a, b}, [a, b](Graph& gr, const Tensor& go, const Tensor& o) {
    if (gr.requires_grad(a)) {
      Tensor ga = broadcast_apply(go, b.value(), go.shape(), [](double x, double y) { return x / y; });
      gr.accumulate(a, reduce_to(ga, a.shape()));
    }
    if (gr.requires_grad(b)) {
      // d(a/b)/db = -(a/b) / b
      Tensor t = broadcast_apply(go, o, go.shape(), [](double x, double y) { return -x * y; });
      Tensor gb = broadcast_apply(t, b.value(), go.shape(), [](double x, double y) { return x / y; });
      gr.accumulate(b, reduce_to(gb, b.shape()));
    }
  });
}

Var scale(Var a, double factor) {
  Graph& g = graph_of("scale", a);
  Tensor v = map_values(a.value(), [factor](double x) { return x * factor; });
  return g.record("scale", std::move(v), {a}, [a, factor](Graph& gr, const Tensor& go, const Tensor&) {
    gr.accumulate(a, map_values(go, [factor](double x) { return x * factor; }));
  });
}

Var add_scalar(Var a, double offset) {
  Graph& g = graph_of("add_scalar", a);
  Tensor v = map_values(a.value(), [offset](double x) { return x + offset; });
  return g.record("add_scalar", std::move(v), {a},
                  [a](Graph& gr, const Tensor& go, const Tensor&) { gr.accumulate(a, go); });
}

Var neg(Var a) { return scale(a, -1.0); }

// ---------------------------------------------------------------------------
// Elementwise unary

Var relu(Var a) {
  Graph& g = graph_of("relu", a);
  Tensor v = map_values(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
  return g.record("relu", std::move(v), {a}, [a](Graph& gr, const Tensor& go, const Tensor& o) {
    Tensor d(go.shape());
    const double* po = o.data();
    const double* pg = go.data();
    double* pd = d.data();
    for (std::size_t i = 0, n = d.size(); i < n; ++i) pd[i] = po[i] > 0.0 ? pg[i] : 0.0;
    gr.accumulate(a, std::move(d));
  });
}

Var sigmoid(Var a) {
  Graph& g = graph_of("sigmoid", a);
  Tensor v = map_values(a.value(), stable_sigmoid);
  return g.record("sigmoid", std::move(v), {a}, [a](Graph& gr, const Tensor& go, const Tensor& o) {
    Tensor d(go.shape());
    for (std::size_t i = 0, n = d.size(); i < n; ++i) d[i] = go[i] * o[i] * (1.0 - o[i]);
    gr.accumulate(a, std::move(d));
  });
}

Var softplus(Var a) {
  Graph& g = graph_of("softplus", a);
  Tensor v = map_values(a.value(), stable_softplus);
  return g.record("softplus", std::move(v), {a}, [a](Graph& gr, const Tensor& go, const Tensor&) {
    const Tensor& x = a.value();
    Tensor d(go.shape());
    for (std::size_t i = 0, n = d.size(); i < n; ++i) d[i] = go[i] * stable_sigmoid(x[i]);
    gr.accumulate(a, std::move(d));
  });
}

Var exp(Var a) {
  Graph& g = graph_of("exp", a);
  Tensor v = map_values(a.value(), [](double x) { return std::exp(x); });
  return g.record("exp", std::move(v), {a}, [a](Graph& gr, const Tensor& go, const Tensor& o) {
    Tensor d(go.shape());
    for (std::size_t i = 0, n = d.size(); i < n; ++i) d[i] = go[i] * o[i];
    gr.accumulate(a, std::move(d));
  });
}

Var log(Var a) {
  Graph& g = graph_of("log", a);
  Tensor v = map_values(a.value(), [](double x) { return std::log(x); });
  return g.record("log", std::move(v), {a}, [a](Graph& gr, const Tensor& go, const Tensor&) {
    const Tensor& x = a.value();
    Tensor d(go.shape());
    for (std::size_t i = 0, n = d.size(); i < n; ++i) d[i] = go[i] / x[i];
    gr.accumulate(a, std::move(d));
  });
}

Var square(Var a) {
  Graph& g = graph_of("square", a);
  Tensor v = map_values(a.value(), [](double x) { return x * x; });
  return g.record("square", std::move(v), {a}, [a](Graph& gr, const Tensor& go, const Tensor&) {
    const Tensor& x = a.value();
    Tensor d(go.shape());
    for (std::size_t i = 0, n = d.size(); i < n; ++i) d[i] = 2.0 * x[i] * go[i];
    gr.accumulate(a, std::move(d));
  });
}

// ---------------------------------------------------------------------------
// Softmax

Var softmax_rows(Var a) {
  Graph& g = graph_of("softmax_rows", a);
  const Tensor& x = a.value();
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  if (cols == 0) throw ShapeError("softmax_rows: empty rows in shape " + shape_str(x.shape()));
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * cols;
    double* o = out.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    const double inv = 1.0 / total;
    for (std::size_t c = 0; c < cols; ++c) o[c] *= inv;
  }
  return g.record("softmax_rows", std::move(out), {a},
                  [a, rows, cols](Graph& gr, const Tensor& go, const Tensor& y) {
                    Tensor d(go.shape());
                    for (std::size_t r = 0; r < rows; ++r) {
                      const double* py = y.data() + r * cols;
                      const double* pg = go.data() + r * cols;
                      double* pd = d.data() + r * cols;
                      double dot = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) dot += pg[c] * py[c];
                      for (std::size_t c = 0; c < cols; ++c) pd[c] = py[c] * (pg[c] - dot);
                    }
                    gr.accumulate(a, std::move(d));
                  });
}

// ---------------------------------------------------------------------------
// Reductions

namespace {

Var reduce_axis(const char* op, Var a, int axis, bool average) {
  Graph& g = graph_of(op, a);
  const Tensor& x = a.value();
  const Extent e = extent_of(x.shape());
  if (axis != 0 && axis != 1) {
    throw ShapeError(std::string(op) + ": axis must be 0 or 1, got " + std::to_string(axis));
  }
  const std::size_t count = axis == 0 ? e.rows : e.cols;
  if (count == 0) throw ShapeError(std::string(op) + ": reducing an empty axis of " + shape_str(x.shape()));
  const double factor = average ? 1.0 / static_cast<double>(count) : 1.0;
  Tensor out = axis == 0 ? Tensor(Shape{1, e.cols}, 0.0) : Tensor(Shape{e.rows, 1}, 0.0);
  if (axis == 0) {
    for (std::size_t r = 0; r < e.rows; ++r) {
      for (std::size_t c = 0; c < e.cols; ++c) out[c] += x[r * e.cols + c];
    }
  } else {
    for (std::size_t r = 0; r < e.rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < e.cols; ++c) s += x[r * e.cols + c];
      out[r] = s;
    }
  }
  if (average) {
    for (double& v : out.values()) v *= factor;
  }
  return g.record(op, std::move(out), {a}, [a, e, axis, factor](Graph& gr, const Tensor& go, const Tensor&) {
    Tensor d(a.shape());
    for (std::size_t r = 0; r < e.rows; ++r) {
      for (std::size_t c = 0; c < e.cols; ++c) d[r * e.cols + c] = go[axis == 0 ? c : r] * factor;
    }
    gr.accumulate(a, std::move(d));
  });
}

Var reduce_all(const char* op, Var a, bool average) {
  Graph& g = graph_of(op, a);
  const Tensor& x = a.value();
  if (x.size() == 0) throw ShapeError(std::string(op) + ": empty operand");
  double s = 0.0;
  for (double v : x.values()) s += v;
  const double factor = average ? 1.0 / static_cast<double>(x.size()) : 1.0;
  return g.record(op, Tensor::scalar(s * factor), {a}, [a, factor](Graph& gr, const Tensor& go, const Tensor&) {
    gr.accumulate(a, Tensor(a.shape(), go.item() * factor));
  });
}

}  // namespace

Var sum(Var a, int axis) { return reduce_axis("sum", a, axis, false); }
Var mean(Var a, int axis) { return reduce_axis("mean", a, axis, true); }
Var sum_all(Var a) { return reduce_all("sum_all", a, false); }
Var mean_all(Var a) { return reduce_all("mean_all", a, true); }

// ---------------------------------------------------------------------------
// Structural

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Graph& g = graph_of("concat_cols", parts[0]);
  const std::size_t rows = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row counts differ, " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out(Shape{rows, total});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& v = parts[i].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[i], widths[i], out.data() + r * total + offset);
    }
    offset += widths[i];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record("concat_cols", std::move(out), parts,
                  [inputs, widths, rows, total](Graph& gr, const Tensor& go, const Tensor&) {
                    std::size_t offset = 0;
                    for (std::size_t i = 0; i < inputs.size(); ++i) {
                      if (gr.requires_grad(inputs[i])) {
                        Tensor d(inputs[i].shape());
                        for (std::size_t r = 0; r < rows; ++r) {
                          std::copy_n(go.data() + r * total + offset, widths[i], d.data() + r * widths[i]);
                        }
                        gr.accumulate(inputs[i], std::move(d));
                      }
                      offset += widths[i];
                    }
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Graph& g = graph_of("concat_rows", parts[0]);
  const std::size_t cols = parts[0].cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column counts differ, " + shape_str(parts[0].shape()) +
                       " vs " + shape_str(p.shape()));
    }
    total += p.rows();
  }
  Tensor out(Shape{total, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + offset * cols);
    offset += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record("concat_rows", std::move(out), parts, [inputs, cols](Graph& gr, const Tensor& go, const Tensor&) {
    std::size_t offset = 0;
    for (const Var& in : inputs) {
      const std::size_t n = in.rows() * cols;
      if (gr.requires_grad(in)) {
        Tensor d(in.shape());
        std::copy_n(go.data() + offset * cols, n, d.data());
        gr.accumulate(in, std::move(d));
      }
      offset += in.rows();
    }
  });
}

Var l1_distance(Var queries, Var keys) {
  Graph& g = graph_of("l1_distance", queries);
  const Tensor& q = queries.value();
  const Tensor& k = keys.value();
  if (q.cols() != k.cols()) {
    throw ShapeError("l1_distance: widths differ for shapes " + shape_str(q.shape()) + " and " +
                     shape_str(k.shape()));
  }
  const std::size_t m = q.rows();
  const std::size_t n = k.rows();
  const std::size_t w = q.cols();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < w; ++c) s += std::abs(q[i * w + c] - k[j * w + c]);
      out[i * n + j] = s;
    }
  }
  return g.record("l1_distance", std::move(out), {queries, keys},
                  [queries, keys, m, n, w](Graph& gr, const Tensor& go, const Tensor&) {
                    const Tensor& q = queries.value();
                    const Tensor& k = keys.value();
                    Tensor dq(q.shape(), 0.0);
                    Tensor dk(k.shape(), 0.0);
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t j = 0; j < n; ++j) {
                        const double gij = go[i * n + j];
                        for (std::size_t c = 0; c < w; ++c) {
                          const double diff = q[i * w + c] - k[j * w + c];
                          const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                          dq[i * w + c] += gij * s;
                          dk[j * w + c] -= gij * s;
                        }
                      }
                    }
                    gr.accumulate(queries, std::move(dq));
                    gr.accumulate(keys, std::move(dk));
                  });
}

Var gather_rows(Var a, std::span<const std::size_t> indices) {
  Graph& g = graph_of("gather_rows", a);
  const Tensor& x = a.value();
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  Tensor out(Shape{indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of range for shape " +
                       shape_str(x.shape()));
    }
    std::copy_n(x.data() + indices[i] * cols, cols, out.data() + i * cols);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return g.record("gather_rows", std::move(out), {a}, [a, idx, cols](Graph& gr, const Tensor& go, const Tensor&) {
    Tensor d(a.shape(), 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double* src = go.data() + i * cols;
      double* dst = d.data() + idx[i] * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
    gr.accumulate(a, std::move(d));
  });
}

Var repeat_rows(Var row, std::size_t count) {
  Graph& g = graph_of("repeat_rows", row);
  const Tensor& x = row.value();
  if (x.rows() != 1) {
    throw ShapeError("repeat_rows: operand must be a single row, got shape " + shape_str(x.shape()));
  }
  const std::size_t cols = x.cols();
  Tensor out(Shape{count, cols});
  for (std::size_t r = 0; r < count; ++r) std::copy_n(x.data(), cols, out.data() + r * cols);
  return g.record("repeat_rows", std::move(out), {row}, [row, count, cols](Graph& gr, const Tensor& go, const Tensor&) {
    Tensor d(row.shape(), 0.0);
    for (std::size_t r = 0; r < count; ++r) {
      for (std::size_t c = 0; c < cols; ++c) d[c] += go[r * cols + c];
    }
    gr.accumulate(row, std::move(d));
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Graph& g = graph_of("slice_cols", a);
  const Tensor& x = a.value();
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  if (begin + count > cols) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for shape " + shape_str(x.shape()));
  }
  Tensor out(Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * cols + begin, count, out.data() + r * count);
  return g.record("slice_cols", std::move(out), {a},
                  [a, rows, cols, begin, count](Graph& gr, const Tensor& go, const Tensor&) {
                    Tensor d(a.shape(), 0.0);
                    for (std::size_t r = 0; r < rows; ++r) {
                      std::copy_n(go.data() + r * count, count, d.data() + r * cols + begin);
                    }
                    gr.accumulate(a, std::move(d));
                  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  Graph& g = graph_of("slice_rows", a);
  const Tensor& x = a.value();
  const std::size_t cols = x.cols();
  if (begin + count > x.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for shape " + shape_str(x.shape()));
  }
  Tensor out(Shape{count, cols});
  std::copy_n(x.data() + begin * cols, count * cols, out.data());
  return g.record("slice_rows", std::move(out), {a}, [a, cols, begin, count](Graph& gr, const Tensor& go, const Tensor&) {
    Tensor d(a.shape(), 0.0);
    std::copy_n(go.data(), count * cols, d.data() + begin * cols);
    gr.accumulate(a, std::move(d));
  });
}

Var reshape(Var a, Shape shape) {
  Graph& g = graph_of("reshape", a);
  if (shape_numel(shape) != a.value().size()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  Tensor out = a.value().reshaped(shape);
  return g.record("reshape", std::move(out), {a}, [a](Graph& gr, const Tensor& go, const Tensor&) {
    gr.accumulate(a, as_shape(go, a.shape()));
  });
}

}  // namespace anp
