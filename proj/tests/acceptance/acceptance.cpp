// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.
//
//   anp_acceptance [--only 1,2,...] [--artifacts DIR] [--fresh]
//
// Trained models, metrics logs and checkpoints are kept under DIR (default
// ./acceptance_artifacts). A run whose final checkpoint was written with the
// same configuration is reused unless --fresh is given; an interrupted run
// continues from its latest checkpoint.

#include "anp/bo.hpp"
#include "anp/checkpoint.hpp"
#include "anp/config.hpp"
#include "anp/gp.hpp"
#include "anp/image.hpp"
#include "anp/metrics.hpp"
#include "anp/model.hpp"
#include "anp/train.hpp"
#include "gradcheck.hpp"

#include <CLI11.hpp>
#include <Eigen/LU>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace anp;

namespace {

constexpr std::uint64_t kSeed = 1;
constexpr std::size_t kGpIterations = 30000;
constexpr std::size_t kImageIterations = 20000;
constexpr std::size_t kChunk = 1000;
constexpr std::size_t kHeldOut = 256;
constexpr std::uint64_t kHeldOutSeed = 424242;
constexpr std::uint64_t kEvalZSeed = 515151;

struct Result {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Tensor uniform_column(std::size_t n, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(Shape{n, 1});
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// ---------------------------------------------------------------------------
// Training runs shared by several criteria.

struct TrainedRun {
  std::unique_ptr<Trainer> trainer;
  std::vector<MetricsRow> rows;
  fs::path dir;
};

std::vector<std::string> read_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<MetricsRow> parse_metrics(const fs::path& p) {
  std::vector<MetricsRow> rows;
  const auto lines = read_lines(p);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    MetricsRow r;
    char comma;
    std::istringstream in(lines[i]);
    in >> r.iteration >> comma >> r.wall_clock_s >> comma >> r.train_loss >> comma >> r.ctx_recon_nll >> comma >>
        r.tgt_nll >> comma >> r.kl;
    rows.push_back(r);
  }
  return rows;
}

std::string checkpoint_config(const fs::path& p) {
  try {
    return load_checkpoint(p.string()).config_text;
  } catch (const CheckpointError&) {
    return "";
  }
}

class Runs {
 public:
  Runs(fs::path root, bool fresh) : root_(std::move(root)), fresh_(fresh) {}

  const fs::path& root() const { return root_; }

  TrainedRun& get(const std::string& name, const TrainConfig& cfg) {
    auto it = runs_.find(name);
    if (it != runs_.end()) return it->second;
    return runs_[name] = train(name, cfg, fresh_);
  }

  /// Trains from scratch in `name`, never reusing anything on disk.
  TrainedRun train(const std::string& name, const TrainConfig& cfg, bool fresh,
                   const std::function<void(const Trainer&)>& after_chunk = {}) {
    const fs::path dir = root_ / name;
    fs::create_directories(dir);
    const std::string text = format_config(cfg);
    const fs::path final_ckpt = dir / "final.ckpt";
    const fs::path partial = dir / "partial.ckpt";
    const fs::path csv_path = dir / "metrics.csv";
    TrainedRun run;
    run.dir = dir;

    if (!fresh && fs::exists(final_ckpt) && checkpoint_config(final_ckpt) == text) {
      std::cerr << "[" << name << "] reusing " << final_ckpt << "\n";
      run.trainer = std::make_unique<Trainer>(Trainer::load(final_ckpt.string()));
      run.rows = parse_metrics(csv_path);
      return run;
    }

    std::ofstream csv;
    if (!fresh && fs::exists(partial) && checkpoint_config(partial) == text) {
      run.trainer = std::make_unique<Trainer>(Trainer::load(partial.string()));
      const std::size_t at = run.trainer->iteration();
      std::cerr << "[" << name << "] continuing from iteration " << at << "\n";
      std::vector<std::string> keep;
      const auto lines = read_lines(csv_path);
      for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i == 0 || std::stoull(lines[i].substr(0, lines[i].find(','))) <= at) keep.push_back(lines[i]);
      }
      csv.open(csv_path, std::ios::trunc);
      for (const auto& l : keep) csv << l << "\n";
    } else {
      run.trainer = std::make_unique<Trainer>(cfg);
      csv.open(csv_path, std::ios::trunc);
    }
    fs::remove(final_ckpt);
    std::ofstream(dir / "config.cfg") << text;

    Trainer& t = *run.trainer;
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t start = t.iteration();
    while (t.iteration() < cfg.iterations) {
      const std::size_t next = std::min(cfg.iterations, (t.iteration() / kChunk + 1) * kChunk);
      t.run(next, &csv);
      t.save(partial.string());
      if (after_chunk) after_chunk(t);
      const double el = seconds_since(t0);
      const double rate = el / static_cast<double>(t.iteration() - start);
      std::cerr << "[" << name << "] " << t.iteration() << "/" << cfg.iterations;
      if (!t.metrics().empty()) {
        std::cerr << " ctx " << fmt(t.metrics().back().ctx_recon_nll) << " tgt " << fmt(t.metrics().back().tgt_nll);
      }
      std::cerr << " " << fmt(rate, 3) << " s/it, eta " << fmt(rate * (cfg.iterations - t.iteration()) / 60, 1)
                << " min\n";
    }
    csv.close();
    t.save(final_ckpt.string());
    fs::remove(partial);
    run.rows = parse_metrics(csv_path);
    return run;
  }

 private:
  fs::path root_;
  bool fresh_;
  std::map<std::string, TrainedRun> runs_;
};

TrainConfig shipped_config(const std::string& file) {
  TrainConfig c = load_config_file(std::string(ANP_SOURCE_DIR) + "/configs/" + file);
  c.seed = kSeed;
  c.iterations = kGpIterations;
  return c;
}

TrainConfig random_kernel(TrainConfig c) {
  c.kernel = HyperMode::Random;
  return c;
}

TrainConfig image_config(AttentionKind kind, std::size_t self_layers) {
  TrainConfig c;
  c.dataset = DatasetKind::Images;
  c.image_source = ImageSource::Synthetic;
  c.image_height = 8;
  c.image_width = 8;
  c.max_points = 64;
  c.model.attention = kind;
  c.model.self_attention_layers = self_layers;
  c.model.heads = 8;
  c.model.width = 64;
  c.batch_size = 16;
  c.learning_rate = 5e-5;
  c.iterations = kImageIterations;
  c.eval_interval = 500;
  c.eval_episodes = 64;
  c.seed = kSeed;
  c.validate();
  return c;
}

std::vector<GPEpisode> held_out_gp(const TrainConfig& cfg) {
  Rng rng(kHeldOutSeed);
  std::vector<GPEpisode> out;
  for (std::size_t i = 0; i < kHeldOut; ++i) out.push_back(sample_episode(cfg.gp_spec(), rng));
  return out;
}

struct Scores {
  double ctx = 0.0;
  double ctx_se = 0.0;
  double tgt = 0.0;
  double tgt_se = 0.0;
};

Scores score(const Trainer& t, const std::vector<Episode>& episodes) {
  Rng rng(kEvalZSeed);
  std::vector<double> ctx, tgt;
  for (const Episode& e : episodes) {
    const EpisodeNll n = episode_nll(t.model(), t.params(), e, rng);
    ctx.push_back(n.context);
    tgt.push_back(n.target);
  }
  const MeanStderr c = mean_stderr(ctx), g = mean_stderr(tgt);
  return {c.mean, c.stderr_, g.mean, g.stderr_};
}

std::vector<Episode> plain(const std::vector<GPEpisode>& eps) {
  std::vector<Episode> out;
  for (const auto& e : eps) out.push_back(e.episode);
  return out;
}

std::string describe(const char* name, const Scores& s) {
  return std::string(name) + " ctx " + fmt(s.ctx) + "+-" + fmt(s.ctx_se) + " tgt " + fmt(s.tgt) + "+-" +
         fmt(s.tgt_se);
}

// ---------------------------------------------------------------------------
// Criterion 1: straight mean-aggregation NP written against the raw tensors.

using Mat = Eigen::MatrixXd;

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t(r, c);
  return m;
}

Mat reference_mlp(const ParamStore& p, const std::string& prefix, Mat h, std::size_t layers) {
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string l = prefix + "/l" + std::to_string(i);
    const Mat w = to_mat(p.at(l + "/w"));
    const Tensor& b = p.at(l + "/b");
    Mat out = h * w;
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) += b[c];
    if (i + 1 < layers) out = out.cwiseMax(0.0);
    h = out;
  }
  return h;
}

double ref_sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
double ref_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Prediction reference_np(const ModelConfig& c, const ParamStore& p, const Tensor& xc, const Tensor& yc,
                        const Tensor& xt, const std::vector<double>& eps) {
  const std::size_t d = c.width, n = xc.rows(), m = xt.rows();
  Mat pairs(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    pairs(i, 0) = xc(i, 0);
    pairs(i, 1) = yc(i, 0);
  }
  const Mat r = reference_mlp(p, "det/pair", pairs, c.det_pair_layers).colwise().mean();
  const Mat s = reference_mlp(p, "lat/pair", pairs, c.latent_pair_layers).colwise().mean();
  const Mat head = reference_mlp(p, "lat/head", s, c.latent_head_layers);
  Mat dec_in(m, 1 + 2 * d);
  for (std::size_t i = 0; i < m; ++i) {
    dec_in(i, 0) = xt(i, 0);
    for (std::size_t k = 0; k < d; ++k) {
      dec_in(i, 1 + k) = r(0, k);
      const double sigma = 0.1 + 0.9 * ref_sigmoid(head(0, d + k));
      dec_in(i, 1 + d + k) = head(0, k) + sigma * eps[k];
    }
  }
  const Mat out = reference_mlp(p, "dec", dec_in, c.decoder_hidden_layers + 1);
  Prediction pred{Tensor(Shape{m, 1}), Tensor(Shape{m, 1})};
  for (std::size_t i = 0; i < m; ++i) {
    pred.mean[i] = out(i, 0);
    pred.stddev[i] = 0.1 + 0.9 * ref_softplus(out(i, 1));
  }
  return pred;
}

Result criterion_np_reduction() {
  ModelConfig c;
  c.attention = AttentionKind::Uniform;
  c.self_attention_layers = 0;
  const NeuralProcess np(c);
  Rng rng(101);
  const ParamStore params = np.init_params(rng);
  EpisodeSpec spec;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Episode e = sample_episode(spec, rng).episode;
    const auto eps = rng.normals(c.width);
    const Prediction a = np.predict_with_noise(params, e.x_context, e.y_context, e.x_target, eps);
    const Prediction b = reference_np(c, params, e.x_context, e.y_context, e.x_target, eps);
    worst = std::max({worst, max_abs_diff(a.mean, b.mean), max_abs_diff(a.stddev, b.stddev)});
  }
  return {worst <= 1e-12, "max |diff| over 100 episodes " + sci(worst) + " (limit 1e-12)"};
}

// ---------------------------------------------------------------------------

Result criterion_permutation() {
  struct Case {
    const char* name;
    AttentionKind kind;
    std::size_t self_layers;
  };
  const Case cases[] = {{"uniform", AttentionKind::Uniform, 0},
                        {"laplace", AttentionKind::Laplace, 0},
                        {"dot", AttentionKind::DotProduct, 0},
                        {"multihead", AttentionKind::MultiHead, 0},
                        {"multihead+self", AttentionKind::MultiHead, 2}};
  Rng rng(202);
  EpisodeSpec spec;
  std::string detail;
  bool ok = true;
  for (const Case& k : cases) {
    ModelConfig c;
    c.attention = k.kind;
    c.self_attention_layers = k.self_layers;
    const NeuralProcess np(c);
    const ParamStore params = np.init_params(rng);
    double worst = 0.0;
    const Episode e = sample_episode(spec, rng).episode;
    Rng r0(7);
    const auto base = np.predict(params, e.x_context, e.y_context, e.x_target, 2, r0);
    for (int t = 0; t < 20; ++t) {
      const auto perm = rng.sample_without_replacement(e.num_context(), e.num_context());
      Rng r1(7);
      const auto p = np.predict(params, take_rows(e.x_context, perm), take_rows(e.y_context, perm), e.x_target,
                                2, r1);
      for (std::size_t s = 0; s < 2; ++s) {
        worst = std::max({worst, max_abs_diff(base[s].mean, p[s].mean), max_abs_diff(base[s].stddev, p[s].stddev)});
      }
    }
    ok = ok && worst <= 1e-9;
    detail += std::string(detail.empty() ? "" : ", ") + k.name + " " + sci(worst);
  }
  return {ok, "max |diff| under 20 permutations: " + detail + " (limit 1e-9)"};
}

// ---------------------------------------------------------------------------

Result criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    const char* name;
    AttentionKind kind;
  };
  const Case cases[] = {{"NP", AttentionKind::Uniform},
                        {"laplace", AttentionKind::Laplace},
                        {"dot", AttentionKind::DotProduct},
                        {"multihead", AttentionKind::MultiHead}};
  Rng rng(303);
  EpisodeSpec spec;
  spec.max_points = 30;
  bool ok = true;
  std::string detail;
  for (const Case& k : cases) {
    ModelConfig c;
    c.attention = k.kind;
    const NeuralProcess np(c);
    const ParamStore params = np.init_params(rng);
    const Episode e = sample_episode(spec, rng).episode;
    const auto noise = rng.normals(c.width);
    const auto res = anp::testing::grad_check(
        params, [&](Params& p) { return np.elbo_loss(p, e, noise); }, 50, rng, 1e-5);
    ok = ok && res.max_rel < 1e-4;
    detail += std::string(detail.empty() ? "" : ", ") + k.name + " " + sci(res.max_rel);
  }
  const double el = seconds_since(t0);
  ok = ok && el < 60.0;
  return {ok, "max relative error at 50 coordinates: " + detail + " (limit 1e-4); " + fmt(el, 1) + " s"};
}

// ---------------------------------------------------------------------------

Result criterion_gp() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(404);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const GPHyperparams hyp{rng.uniform(0.1, 0.6), rng.uniform(0.1, 1.0), 0.02};
    const std::size_t n = rng.uniform_int(1, 8);
    const Tensor xc = uniform_column(n, rng);
    const Tensor yc = sample_curve(hyp, xc, rng);
    const Tensor xq = uniform_column(16, rng);
    RowMatrix kcc = se_kernel(xc, xc, hyp).matrix();
    kcc.diagonal().array() += hyp.noise_std * hyp.noise_std;
    const RowMatrix kinv = kcc.inverse();
    const RowMatrix kqc = se_kernel(xq, xc, hyp).matrix();
    const RowMatrix kqq = se_kernel(xq, xq, hyp).matrix();
    const Eigen::VectorXd mean = kqc * kinv * yc.matrix();
    const RowMatrix cov = kqq - kqc * kinv * kqc.transpose();
    const GPPosterior post = gp_posterior(hyp, xc, yc, xq);
    for (std::size_t i = 0; i < 16; ++i) {
      worst = std::max({worst, std::abs(post.mean[i] - mean(i)), std::abs(post.variance[i] - cov(i, i))});
    }
  }

  const GPHyperparams hyp{0.6, 1.0, 0.02};
  const Tensor xs = uniform_column(2, rng);
  const Tensor k = se_kernel(xs, xs, hyp);
  const std::size_t draws = 100000;
  double s0 = 0, s1 = 0, s00 = 0, s11 = 0, s01 = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Tensor y = sample_curve(hyp, xs, rng);
    s0 += y[0];
    s1 += y[1];
    s00 += y[0] * y[0];
    s11 += y[1] * y[1];
    s01 += y[0] * y[1];
  }
  const double nd = static_cast<double>(draws);
  const double v0 = k(0, 0) + hyp.noise_std * hyp.noise_std;
  const double v1 = k(1, 1) + hyp.noise_std * hyp.noise_std;
  const double c01 = k(0, 1);
  const double emp_v0 = (s00 - s0 * s0 / nd) / (nd - 1);
  const double emp_v1 = (s11 - s1 * s1 / nd) / (nd - 1);
  const double emp_c01 = (s01 - s0 * s1 / nd) / (nd - 1);
  const double se_v0 = v0 * std::sqrt(2.0 / (nd - 1));
  const double se_v1 = v1 * std::sqrt(2.0 / (nd - 1));
  const double se_c01 = std::sqrt((v0 * v1 + c01 * c01) / nd);
  const double z0 = std::abs(emp_v0 - v0) / se_v0;
  const double z1 = std::abs(emp_v1 - v1) / se_v1;
  const double z01 = std::abs(emp_c01 - c01) / se_c01;
  const double el = seconds_since(t0);
  const bool ok = worst <= 1e-8 && z0 < 3 && z1 < 3 && z01 < 3 && el < 120.0;
  return {ok, "posterior vs dense inverse max |diff| " + sci(worst) +
                  " (limit 1e-8); Monte-Carlo deviations in standard errors: var " + fmt(z0, 2) + ", " +
                  fmt(z1, 2) + ", cov " + fmt(z01, 2) + " (limit 3); " + fmt(el, 1) + " s"};
}

// ---------------------------------------------------------------------------

std::size_t first_reaching(const std::vector<MetricsRow>& rows, double level) {
  for (const MetricsRow& r : rows) {
    if (r.ctx_recon_nll <= level) return r.iteration;
  }
  return 0;
}

Result criterion_underfitting(Runs& runs) {
  const TrainConfig np_cfg = shipped_config("gp1d_np.cfg");
  const TrainConfig mh_cfg = shipped_config("gp1d_anp_multihead.cfg");
  TrainedRun& np = runs.get("gp_np_fixed", np_cfg);
  TrainedRun& mh = runs.get("gp_multihead_fixed", mh_cfg);
  const auto eps = plain(held_out_gp(np_cfg));
  const Scores a = score(*np.trainer, eps);
  const Scores b = score(*mh.trainer, eps);
  const double gap = a.ctx - b.ctx;
  // Logged curves use the same 64 evaluation episodes at every interval.
  const double np_final = np.rows.back().ctx_recon_nll;
  const std::size_t reach = first_reaching(mh.rows, np_final);
  const bool ok = gap >= 0.3 && reach > 0 && reach <= kGpIterations / 2;
  return {ok, describe("NP", a) + "; " + describe("multihead", b) + "; ctx gap " + fmt(gap) +
                  " (need >= 0.3); multihead reaches NP's final logged ctx NLL " + fmt(np_final) +
                  (reach ? " at iteration " + std::to_string(reach) : std::string(" never")) + " (need <= " +
                  std::to_string(kGpIterations / 2) + ")"};
}

Result criterion_target_order(Runs& runs) {
  const TrainConfig np_cfg = shipped_config("gp1d_np.cfg");
  TrainedRun& np = runs.get("gp_np_fixed", np_cfg);
  TrainedRun& mh = runs.get("gp_multihead_fixed", shipped_config("gp1d_anp_multihead.cfg"));
  TrainedRun& dot = runs.get("gp_dot_fixed", shipped_config("gp1d_anp_dot.cfg"));
  TrainedRun& lap = runs.get("gp_laplace_fixed", shipped_config("gp1d_anp_laplace.cfg"));
  const auto eps = plain(held_out_gp(np_cfg));
  const Scores a = score(*np.trainer, eps);
  const Scores b = score(*mh.trainer, eps);
  const Scores c = score(*dot.trainer, eps);
  const Scores d = score(*lap.trainer, eps);
  const bool ok = b.tgt + 0.05 <= c.tgt && c.tgt + 0.05 <= a.tgt;
  return {ok, "target NLL multihead " + fmt(b.tgt) + ", dot " + fmt(c.tgt) + ", NP " + fmt(a.tgt) +
                  " (need multihead + 0.05 <= dot and dot + 0.05 <= NP); laplace " + fmt(d.tgt) + " (reported only)"};
}

Result criterion_random_kernel(Runs& runs) {
  const TrainConfig np_fixed = shipped_config("gp1d_np.cfg");
  const TrainConfig np_rand = random_kernel(np_fixed);
  const TrainConfig mh_rand = random_kernel(shipped_config("gp1d_anp_multihead.cfg"));
  TrainedRun& np_f = runs.get("gp_np_fixed", np_fixed);
  TrainedRun& mh_f = runs.get("gp_multihead_fixed", shipped_config("gp1d_anp_multihead.cfg"));
  TrainedRun& np_r = runs.get("gp_np_random", np_rand);
  TrainedRun& mh_r = runs.get("gp_multihead_random", mh_rand);
  const auto fixed_eps = plain(held_out_gp(np_fixed));
  const auto rand_eps = plain(held_out_gp(np_rand));
  const double gap_fixed = score(*np_f.trainer, fixed_eps).ctx - score(*mh_f.trainer, fixed_eps).ctx;
  const Scores a = score(*np_r.trainer, rand_eps);
  const Scores b = score(*mh_r.trainer, rand_eps);
  const double gap_rand = a.ctx - b.ctx;
  return {gap_rand >= gap_fixed, describe("NP", a) + "; " + describe("multihead", b) + "; ctx gap random " +
                                     fmt(gap_rand) + " vs fixed " + fmt(gap_fixed) + " (need random >= fixed)"};
}

Result criterion_oracle(Runs& runs) {
  const TrainConfig cfg = shipped_config("gp1d_anp_multihead.cfg");
  TrainedRun& mh = runs.get("gp_multihead_fixed", cfg);
  const auto eps = held_out_gp(cfg);
  const Scores s = score(*mh.trainer, plain(eps));
  std::vector<double> oracle;
  for (const GPEpisode& e : eps) oracle.push_back(oracle_nll(e.hyperparams, e.episode).target);
  const MeanStderr o = mean_stderr(oracle);
  const double gap = s.tgt - o.mean;
  return {gap <= 1.0, "multihead target NLL " + fmt(s.tgt) + ", oracle GP " + fmt(o.mean) + "+-" +
                          fmt(o.stderr_) + ", gap " + fmt(gap) + " (need <= 1.0)"};
}

Result criterion_bo(Runs& runs) {
  const TrainConfig np_cfg = shipped_config("gp1d_np.cfg");
  TrainedRun& np = runs.get("gp_np_fixed", np_cfg);
  TrainedRun& mh = runs.get("gp_multihead_fixed", shipped_config("gp1d_anp_multihead.cfg"));
  const auto t0 = std::chrono::steady_clock::now();
  const GPHyperparams hyp = np_cfg.gp;
  Rng problems_rng(derive_seed(kSeed, 0));
  std::vector<BOProblem> problems;
  for (int f = 0; f < 100; ++f) problems.push_back(sample_bo_problem(hyp, problems_rng));
  std::ofstream csv(runs.root() / "bo.csv");
  csv << "method," << kBOHeader << "\n";
  const auto run = [&](const char* name, const Surrogate& s) {
    Rng policy(derive_seed(kSeed, 1));
    double total = 0.0;
    for (std::size_t f = 0; f < problems.size(); ++f) {
      const BOTrace t = thompson_bo(problems[f], 30, s, policy);
      check_trace(t);
      total += t.simple_regret.back();
      std::ostringstream rows;
      write_bo_rows(rows, f, t);
      std::istringstream in(rows.str());
      for (std::string line; std::getline(in, line);) csv << name << "," << line << "\n";
    }
    return total / static_cast<double>(problems.size());
  };
  const double r_np = run("np", model_surrogate(np.trainer->model(), np.trainer->params()));
  const double r_mh = run("multihead", model_surrogate(mh.trainer->model(), mh.trainer->params()));
  const double r_or = run("oracle", oracle_surrogate(hyp));
  const double el = seconds_since(t0);
  const bool ok = r_mh <= r_np && r_mh <= 2.0 * r_or && el < 1200.0;
  return {ok, "mean simple regret at iteration 30: multihead " + fmt(r_mh, 5) + ", NP " + fmt(r_np, 5) +
                  ", oracle GP " + fmt(r_or, 5) + " (need multihead <= NP and <= 2x oracle); " + fmt(el, 1) + " s"};
}

Result criterion_images(Runs& runs) {
  const TrainConfig np_cfg = image_config(AttentionKind::Uniform, 0);
  const TrainConfig mh_cfg = image_config(AttentionKind::MultiHead, 2);
  TrainedRun& np = runs.get("img_np", np_cfg);
  TrainedRun& mh = runs.get("img_stacked_multihead", mh_cfg);
  const ImageDataset& test = *mh.trainer->source().test_images();
  Rng rng(kHeldOutSeed);
  std::vector<Episode> eps;
  for (std::size_t i = 0; i < kHeldOut; ++i) eps.push_back(sample_pixel_episode(test, mh_cfg.pixel_spec(), rng));
  const Scores a = score(*np.trainer, eps);
  const Scores b = score(*mh.trainer, eps);
  const double gap = a.ctx - b.ctx;

  std::vector<std::size_t> all(64);
  std::iota(all.begin(), all.end(), 0);
  const auto [xc, yc] = image_to_regression(test, 0, all);
  const Tensor fine = make_grid(32, 32);
  Rng zr(kEvalZSeed);
  const auto pred = mh.trainer->model().predict(mh.trainer->params(), xc, yc, fine, 1, zr).front();
  std::size_t coincident = 0;
  double worst_sigma = 0.0;
  for (std::size_t i = 0; i < fine.rows(); ++i) {
    for (std::size_t j = 0; j < xc.rows(); ++j) {
      if (fine(i, 0) == xc(j, 0) && fine(i, 1) == xc(j, 1)) {
        ++coincident;
        worst_sigma = std::max(worst_sigma, pred.stddev[i]);
      }
    }
  }
  const bool mapped = pred.mean.rows() == 1024 && pred.mean.all_finite() && coincident > 0 && worst_sigma < 0.2;
  return {gap >= 0.2 && mapped,
          describe("NP", a) + "; " + describe("stacked multihead", b) + "; ctx gap " + fmt(gap) +
              " (need >= 0.2); 8x8 -> 32x32 prediction over " + std::to_string(pred.mean.rows()) + " points, " +
              std::to_string(coincident) + " coincident points, max sigma_y there " + fmt(worst_sigma) +
              " (need < 0.2)"};
}

std::vector<std::string> mask_wall_clock(const std::vector<std::string>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) {
    const auto a = l.find(',');
    const auto b = l.find(',', a + 1);
    out.push_back(a == std::string::npos ? l : l.substr(0, a + 1) + "*" + l.substr(b));
  }
  return out;
}

Result criterion_determinism(Runs& runs) {
  const TrainConfig cfg = shipped_config("gp1d_np.cfg");
  TrainedRun& first = runs.get("gp_np_fixed", cfg);
  const std::size_t resume_at = 20000;
  const fs::path resume_ckpt = runs.root() / "gp_np_fixed_repeat" / ("ckpt_" + std::to_string(resume_at) + ".ckpt");
  fs::create_directories(resume_ckpt.parent_path());
  TrainedRun repeat = runs.train("gp_np_fixed_repeat", cfg, true, [&](const Trainer& t) {
    if (t.iteration() == resume_at) t.save(resume_ckpt.string());
  });

  const auto a = read_lines(first.dir / "metrics.csv");
  const auto b = read_lines(repeat.dir / "metrics.csv");
  const bool raw_identical = a == b;
  const bool masked_identical = mask_wall_clock(a) == mask_wall_clock(b);
  bool params_identical = true;
  for (const auto& [name, t] : first.trainer->params()) params_identical &= t == repeat.trainer->params().at(name);

  // Resume from the repeat's own checkpoint at `resume_at` and compare traces.
  Trainer resumed = Trainer::load(resume_ckpt.string());
  resumed.run(cfg.iterations);
  const auto& full = repeat.trainer->loss_trace();
  const auto& tail = resumed.loss_trace();
  bool trace_identical = tail.size() == cfg.iterations - resume_at && full.size() == cfg.iterations;
  for (std::size_t i = 0; trace_identical && i < tail.size(); ++i) trace_identical = tail[i] == full[resume_at + i];
  for (const auto& [name, t] : resumed.params()) trace_identical &= t == repeat.trainer->params().at(name);

  const bool ok = masked_identical && params_identical && trace_identical;
  return {ok, std::string("metrics CSV identical apart from wall_clock_s: ") + (masked_identical ? "yes" : "no") +
                  " (raw bytes identical: " + (raw_identical ? "yes" : "no") + "); final parameters identical: " +
                  (params_identical ? "yes" : "no") + "; resume at " + std::to_string(resume_at) +
                  " reproduces loss trace and parameters to " + std::to_string(cfg.iterations) + ": " +
                  (trace_identical ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"End-to-end acceptance checks"};
  std::vector<int> only;
  std::string artifacts = "acceptance_artifacts";
  bool fresh = false;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--artifacts", artifacts, "Directory for trained models and logs");
  app.add_flag("--fresh", fresh, "Retrain instead of reusing finished runs");
  CLI11_PARSE(app, argc, argv);

  Runs runs(artifacts, fresh);
  fs::create_directories(artifacts);
  const std::vector<std::pair<const char*, std::function<Result()>>> criteria = {
      {"NP-reduction equivalence", criterion_np_reduction},
      {"permutation invariance", criterion_permutation},
      {"gradient correctness", criterion_gradients},
      {"GP machinery", criterion_gp},
      {"underfitting reproduction", [&] { return criterion_underfitting(runs); }},
      {"target NLL ordering", [&] { return criterion_target_order(runs); }},
      {"random-kernel expressiveness", [&] { return criterion_random_kernel(runs); }},
      {"oracle comparison", [&] { return criterion_oracle(runs); }},
      {"BO reproduction", [&] { return criterion_bo(runs); }},
      {"image pipeline", [&] { return criterion_images(runs); }},
      {"determinism and persistence", [&] { return criterion_determinism(runs); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  std::ofstream summary(fs::path(artifacts) / "summary.txt", std::ios::app);
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Result r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    failures += r.pass ? 0 : 1;
    std::ostringstream line;
    line << (r.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << r.detail
         << " [" << fmt(seconds_since(t0), 1) << " s]";
    std::cout << line.str() << std::endl;
    summary << line.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
