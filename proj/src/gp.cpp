// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/gp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <cmath>
#include <sstream>

namespace anp {

namespace {

void require_column(const char* what, const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 1) {
    throw ShapeError(std::string(what) + ": expected shape [*, 1], got " + shape_str(t.shape()));
  }
}

}  // namespace

void GPHyperparams::validate() const {
  if (!(length_scale > 0.0) || !(signal_scale > 0.0) || !(noise_std > 0.0)) {
    std::ostringstream os;
    os << "gp hyperparameters must be positive (l=" << length_scale << ", sigma_f=" << signal_scale
       << ", sigma_n=" << noise_std << ")";
    throw std::invalid_argument(os.str());
  }
}

void EpisodeSpec::validate() const {
  if (min_context < 1 || min_context > max_points) {
    throw std::invalid_argument("episode spec: need 1 <= min_context <= max_points");
  }
  if (!(x_min < x_max)) throw std::invalid_argument("episode spec: empty x range");
  if (mode == HyperMode::Fixed) fixed.validate();
  if (!(length_scale_min > 0.0 && length_scale_min <= length_scale_max && signal_scale_min > 0.0 &&
        signal_scale_min <= signal_scale_max)) {
    throw std::invalid_argument("episode spec: bad hyperparameter ranges");
  }
}

Tensor se_kernel(const Tensor& xs1, const Tensor& xs2, const GPHyperparams& hyp) {
  require_column("se_kernel", xs1);
  require_column("se_kernel", xs2);
  const std::size_t a = xs1.dim(0);
  const std::size_t b = xs2.dim(0);
  const double var = hyp.signal_scale * hyp.signal_scale;
  const double inv = 1.0 / (2.0 * hyp.length_scale * hyp.length_scale);
  Tensor k(Shape{a, b});
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double diff = xs1[i] - xs2[j];
      k[i * b + j] = var * std::exp(-diff * diff * inv);
    }
  }
  return k;
}

RowMatrix cholesky_with_jitter(const RowMatrix& cov) {
  const Eigen::Index n = cov.rows();
  double jitter = 0.0;
  for (;;) {
    RowMatrix a = cov;
    a.diagonal().array() += jitter;
    Eigen::LLT<RowMatrix> llt(a);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1.0001e-4) break;
  }
  Eigen::SelfAdjointEigenSolver<RowMatrix> es(cov, Eigen::EigenvaluesOnly);
  std::ostringstream os;
  os << "cholesky failed for " << n << "x" << n << " covariance after jitter 1e-4";
  if (es.info() == Eigen::Success && n > 0) {
    const auto ev = es.eigenvalues();
    os << "; eigenvalues in [" << ev.minCoeff() << ", " << ev.maxCoeff() << "], condition estimate "
       << std::abs(ev.maxCoeff() / ev.minCoeff());
  }
  throw CholeskyError(os.str());
}

Tensor sample_curve(const GPHyperparams& hyp, const Tensor& xs, Rng& rng) {
  hyp.validate();
  require_column("sample_curve", xs);
  const std::size_t k = xs.dim(0);
  Tensor cov = se_kernel(xs, xs, hyp);
  RowMatrix c = cov.matrix();
  c.diagonal().array() += hyp.noise_std * hyp.noise_std;
  const RowMatrix l = cholesky_with_jitter(c);
  Eigen::VectorXd eps(k);
  for (std::size_t i = 0; i < k; ++i) eps[i] = rng.normal();
  Tensor ys(Shape{k, 1});
  Eigen::Map<Eigen::VectorXd>(ys.data(), k) = l.triangularView<Eigen::Lower>() * eps;
  return ys;
}

GPEpisode sample_episode(const EpisodeSpec& spec, Rng& rng) {
  spec.validate();
  GPHyperparams hyp = spec.fixed;
  if (spec.mode == HyperMode::Random) {
    hyp.length_scale = rng.uniform(spec.length_scale_min, spec.length_scale_max);
    hyp.signal_scale = rng.uniform(spec.signal_scale_min, spec.signal_scale_max);
  }
  const std::size_t n = rng.uniform_int(spec.min_context, spec.max_points);
  const std::size_t m = n + rng.uniform_int(0, spec.max_points - n);
  Tensor xs(Shape{m, 1});
  for (double& x : xs.values()) x = rng.uniform(spec.x_min, spec.x_max);
  Tensor ys = sample_curve(hyp, xs, rng);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return {make_episode(std::move(xs), std::move(ys), std::move(idx)), hyp};
}

namespace {

struct Conditioned {
  RowMatrix chol;           // of K_cc + sigma_n^2 I
  Eigen::VectorXd alpha;    // (K_cc + sigma_n^2 I)^-1 y
  RowMatrix cross;          // K_cq
};

Conditioned condition(const GPHyperparams& hyp, const Tensor& x_context, const Tensor& y_context,
                      const Tensor& x_query) {
  const std::size_t n = x_context.dim(0);
  RowMatrix kcc = se_kernel(x_context, x_context, hyp).matrix();
  kcc.diagonal().array() += hyp.noise_std * hyp.noise_std;
  Conditioned c;
  c.chol = cholesky_with_jitter(kcc);
  const Eigen::Map<const Eigen::VectorXd> y(y_context.data(), n);
  c.alpha = c.chol.triangularView<Eigen::Lower>().solve(y);
  c.chol.transpose().triangularView<Eigen::Upper>().solveInPlace(c.alpha);
  c.cross = se_kernel(x_context, x_query, hyp).matrix();
  return c;
}

}  // namespace

GPPosterior gp_posterior(const GPHyperparams& hyp, const Tensor& x_context, const Tensor& y_context,
                         const Tensor& x_query) {
  hyp.validate();
  require_column("gp_posterior x_context", x_context);
  require_column("gp_posterior y_context", y_context);
  require_column("gp_posterior x_query", x_query);
  if (x_context.dim(0) != y_context.dim(0)) throw ShapeError("gp_posterior: context x/y row counts differ");
  const std::size_t q = x_query.dim(0);
  const double prior = hyp.signal_scale * hyp.signal_scale;
  GPPosterior post{Tensor(Shape{q, 1}, 0.0), Tensor(Shape{q, 1}, prior)};
  if (x_context.dim(0) == 0) return post;
  const Conditioned c = condition(hyp, x_context, y_context, x_query);
  Eigen::Map<Eigen::VectorXd>(post.mean.data(), q) = c.cross.transpose() * c.alpha;
  const RowMatrix v = c.chol.triangularView<Eigen::Lower>().solve(c.cross);
  for (std::size_t i = 0; i < q; ++i) {
    post.variance[i] = std::max(0.0, prior - v.col(static_cast<Eigen::Index>(i)).squaredNorm());
  }
  return post;
}

Tensor observation_stddev(const GPPosterior& posterior, const GPHyperparams& hyp) {
  Tensor s(posterior.variance.shape());
  const double noise = hyp.noise_std * hyp.noise_std;
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(posterior.variance[i] + noise);
  return s;
}

Tensor gp_posterior_sample(const GPHyperparams& hyp, const Tensor& x_context, const Tensor& y_context,
                           const Tensor& x_query, Rng& rng) {
  hyp.validate();
  require_column("gp_posterior_sample x_query", x_query);
  const std::size_t q = x_query.dim(0);
  RowMatrix cov = se_kernel(x_query, x_query, hyp).matrix();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(q);
  if (x_context.dim(0) > 0) {
    const Conditioned c = condition(hyp, x_context, y_context, x_query);
    mean = c.cross.transpose() * c.alpha;
    const RowMatrix v = c.chol.triangularView<Eigen::Lower>().solve(c.cross);
    cov.noalias() -= v.transpose() * v;
  }
  const RowMatrix l = cholesky_with_jitter(cov);
  Eigen::VectorXd eps(q);
  for (std::size_t i = 0; i < q; ++i) eps[i] = rng.normal();
  Tensor out(Shape{q, 1});
  Eigen::Map<Eigen::VectorXd>(out.data(), q) = mean + l.triangularView<Eigen::Lower>() * eps;
  return out;
}

// ---------------------------------------------------------------------------
// Episode dumps

namespace {

using nlohmann::json;

json rows_to_json(const Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor rows_from_json(const json& rows, std::size_t width) {
  Tensor t(Shape{rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) throw std::runtime_error("episode dump: ragged array");
    for (std::size_t c = 0; c < width; ++c) t(r, c) = rows[r][c].get<double>();
  }
  return t;
}

}  // namespace

std::string dump_episodes(std::span<const GPEpisode> episodes) {
  json doc;
  doc["format"] = "anp-episodes";
  doc["version"] = 1;
  json list = json::array();
  for (const GPEpisode& ge : episodes) {
    const Episode& e = ge.episode;
    json rec;
    rec["hyperparams"] = {{"length_scale", ge.hyperparams.length_scale},
                          {"signal_scale", ge.hyperparams.signal_scale},
                          {"noise_std", ge.hyperparams.noise_std}};
    rec["x_dim"] = e.x_dim();
    rec["y_dim"] = e.y_dim();
    rec["x_context"] = rows_to_json(e.x_context);
    rec["y_context"] = rows_to_json(e.y_context);
    rec["x_target"] = rows_to_json(e.x_target);
    rec["y_target"] = rows_to_json(e.y_target);
    rec["context_indices"] = e.context_indices;
    list.push_back(std::move(rec));
  }
  doc["episodes"] = std::move(list);
  return doc.dump(1);
}

std::vector<GPEpisode> load_episodes(const std::string& json_text) {
  const json doc = json::parse(json_text);
  if (doc.value("format", "") != "anp-episodes") throw std::runtime_error("episode dump: unknown format");
  std::vector<GPEpisode> out;
  for (const json& rec : doc.at("episodes")) {
    GPEpisode ge;
    const json& h = rec.at("hyperparams");
    ge.hyperparams = {h.at("length_scale").get<double>(), h.at("signal_scale").get<double>(),
                      h.at("noise_std").get<double>()};
    const std::size_t dx = rec.at("x_dim").get<std::size_t>();
    const std::size_t dy = rec.at("y_dim").get<std::size_t>();
    Episode& e = ge.episode;
    e.x_context = rows_from_json(rec.at("x_context"), dx);
    e.y_context = rows_from_json(rec.at("y_context"), dy);
    e.x_target = rows_from_json(rec.at("x_target"), dx);
    e.y_target = rows_from_json(rec.at("y_target"), dy);
    e.context_indices = rec.at("context_indices").get<std::vector<std::size_t>>();
    validate(e);
    out.push_back(std::move(ge));
  }
  return out;
}

}  // namespace anp
