// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/train.hpp"

#include "anp/checkpoint.hpp"
#include "anp/config.hpp"
#include "anp/metrics.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

namespace anp {

namespace {

// Streams of one run.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kEvalStream = 2;
constexpr std::uint64_t kSyntheticTrain = 0;
constexpr std::uint64_t kSyntheticTest = 1;

std::string num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t eval_seed(std::uint64_t seed) { return derive_seed(seed, kEvalStream); }

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  resolved_model().validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (eval_interval > 0 && eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
  if (dataset == DatasetKind::GP) {
    if (kernel == HyperMode::Fixed) gp.validate();
    gp_spec().validate();
  } else {
    if (image_source == ImageSource::Idx && image_train_path.empty()) {
      throw std::invalid_argument("image_train_path is required for image_source = idx");
    }
    if (image_source == ImageSource::Synthetic) {
      if (image_height < 2 || image_width < 2) throw std::invalid_argument("image extents must be >= 2");
      if (synthetic_train_count < 1 || synthetic_test_count < 1) {
        throw std::invalid_argument("synthetic image counts must be >= 1");
      }
      if (max_points > image_height * image_width) {
        throw std::invalid_argument("max_points exceeds the pixels per image");
      }
    }
    if (min_context < 1 || min_context > max_points) {
      throw std::invalid_argument("need 1 <= min_context <= max_points");
    }
  }
}

EpisodeSpec TrainConfig::gp_spec() const {
  EpisodeSpec s;
  s.min_context = min_context;
  s.max_points = max_points;
  s.x_min = x_min;
  s.x_max = x_max;
  s.mode = kernel;
  s.fixed = gp;
  s.length_scale_min = length_scale_min;
  s.length_scale_max = length_scale_max;
  s.signal_scale_min = signal_scale_min;
  s.signal_scale_max = signal_scale_max;
  return s;
}

PixelEpisodeSpec TrainConfig::pixel_spec() const {
  PixelEpisodeSpec s;
  s.min_context = min_context;
  s.max_points = max_points;
  return s;
}

ModelConfig TrainConfig::resolved_model(std::size_t image_channels) const {
  ModelConfig m = model;
  m.x_dim = dataset == DatasetKind::GP ? 1 : 2;
  m.y_dim = dataset == DatasetKind::GP ? 1 : image_channels;
  return m;
}

// ---------------------------------------------------------------------------

EpisodeSource::EpisodeSource(const TrainConfig& config)
    : kind_(config.dataset), gp_(config.gp_spec()), pixel_(config.pixel_spec()) {
  if (kind_ == DatasetKind::GP) return;
  if (config.image_source == ImageSource::Synthetic) {
    Rng train_rng(derive_seed(config.synthetic_seed, kSyntheticTrain));
    Rng test_rng(derive_seed(config.synthetic_seed, kSyntheticTest));
    train_images_ = std::make_shared<ImageDataset>(
        synthetic_shapes(config.synthetic_train_count, config.image_height, config.image_width, train_rng));
    auto test = synthetic_shapes(config.synthetic_test_count, config.image_height, config.image_width, test_rng);
    test.split = "test";
    test_images_ = std::make_shared<ImageDataset>(std::move(test));
  } else {
    train_images_ = std::make_shared<ImageDataset>(load_idx(config.image_train_path));
    if (config.image_test_path.empty()) {
      test_images_ = train_images_;
    } else {
      auto test = load_idx(config.image_test_path);
      test.split = "test";
      test_images_ = std::make_shared<ImageDataset>(std::move(test));
    }
  }
  pixel_.validate(*train_images_);
  pixel_.validate(*test_images_);
}

Episode EpisodeSource::train_episode(Rng& rng) const {
  if (kind_ == DatasetKind::GP) return sample_episode(gp_, rng).episode;
  return sample_pixel_episode(*train_images_, pixel_, rng);
}

Episode EpisodeSource::eval_episode(Rng& rng) const {
  if (kind_ == DatasetKind::GP) return sample_episode(gp_, rng).episode;
  return sample_pixel_episode(*test_images_, pixel_, rng);
}

std::size_t EpisodeSource::y_dim() const { return kind_ == DatasetKind::GP ? 1 : train_images_->channels; }

// ---------------------------------------------------------------------------

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, double lr) {
  if (grads.size() != params.size()) throw ShapeError("adam_step: gradient set does not match parameters");
  if (state.step == 0 && state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace(name, Tensor(p.shape(), 0.0));
      state.v.emplace(name, Tensor(p.shape(), 0.0));
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, p] : params) {
    const auto g_it = grads.find(name);
    const auto m_it = state.m.find(name);
    const auto v_it = state.v.find(name);
    if (g_it == grads.end() || m_it == state.m.end() || v_it == state.v.end()) {
      throw ShapeError("adam_step: no gradient or moment for '" + name + "'");
    }
    const Tensor& g = g_it->second;
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    if (g.shape() != p.shape() || m.shape() != p.shape() || v.shape() != p.shape()) {
      throw ShapeError("adam_step: shape mismatch for '" + name + "': param " + shape_str(p.shape()) +
                       ", grad " + shape_str(g.shape()));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
    }
  }
}

std::string format_metrics_row(const MetricsRow& r) {
  return std::to_string(r.iteration) + "," + num(r.wall_clock_s) + "," + num(r.train_loss) + "," +
         num(r.ctx_recon_nll) + "," + num(r.tgt_nll) + "," + num(r.kl);
}

// ---------------------------------------------------------------------------

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)),
      source_(std::make_shared<EpisodeSource>(config_)),
      model_(config_.resolved_model(source_->y_dim())),
      rng_(derive_seed(config_.seed, kTrainStream)),
      start_(std::chrono::steady_clock::now()) {
  config_.validate();
  Rng init(derive_seed(config_.seed, kInitStream));
  params_ = model_.init_params(init);
}

double Trainer::step() {
  const std::size_t b = config_.batch_size;
  std::vector<Episode> batch;
  batch.reserve(b);
  for (std::size_t i = 0; i < b; ++i) batch.push_back(source_->train_episode(rng_));
  const std::vector<double> noise = rng_.normals(b * model_.config().width);

  Graph graph;
  Params params(graph, params_);
  std::vector<ElboTerms> terms;
  Var loss;
  try {
    loss = model_.batch_loss(params, batch, noise, &terms);
  } catch (const std::domain_error& e) {
    throw NonFiniteLoss(iteration_ + 1, std::string(e.what()) + " at iteration " + std::to_string(iteration_ + 1) +
                                            " (predictive scale is not finite)");
  }
  const double value = loss.value().item();
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << "non-finite loss " << value << " at iteration " << iteration_ + 1 << "; per-episode terms:";
    for (std::size_t i = 0; i < terms.size(); ++i) {
      os << " [" << i << ": n=" << batch[i].num_context() << " m=" << batch[i].num_target()
         << " nll=" << terms[i].recon_nll << " kl=" << terms[i].kl << "]";
    }
    throw NonFiniteLoss(iteration_ + 1, os.str());
  }
  graph.backward(loss);
  const ParamStore grads = params.gradients();
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) {
      throw NonFiniteLoss(iteration_ + 1, "non-finite gradient for '" + name + "' at iteration " +
                                              std::to_string(iteration_ + 1));
    }
  }
  adam_step(params_, grads, adam_, config_.learning_rate);

  ++iteration_;
  loss_trace_.push_back(value);
  double kl = 0.0;
  for (const ElboTerms& t : terms) kl += t.kl;
  interval_loss_ += value;
  interval_kl_ += kl / static_cast<double>(terms.size());
  ++interval_steps_;
  return value;
}

EvalSummary Trainer::evaluate(std::size_t episodes, std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<double> ctx;
  std::vector<double> tgt;
  for (std::size_t i = 0; i < episodes; ++i) {
    const Episode e = source_->eval_episode(rng);
    const EpisodeNll nll = episode_nll(model_, params_, e, rng);
    ctx.push_back(nll.context);
    tgt.push_back(nll.target);
  }
  const MeanStderr c = mean_stderr(ctx);
  const MeanStderr t = mean_stderr(tgt);
  return {c.mean, c.stderr_, t.mean, t.stderr_};
}

MetricsRow Trainer::log_row() {
  MetricsRow row;
  row.iteration = iteration_;
  row.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  const double steps = static_cast<double>(std::max<std::size_t>(interval_steps_, 1));
  row.train_loss = interval_loss_ / steps;
  row.kl = interval_kl_ / steps;
  const EvalSummary s = evaluate(config_.eval_episodes, eval_seed(config_.seed));
  row.ctx_recon_nll = s.ctx_mean;
  row.tgt_nll = s.tgt_mean;
  interval_loss_ = interval_kl_ = 0.0;
  interval_steps_ = 0;
  metrics_.push_back(row);
  return row;
}

void Trainer::run(std::size_t iterations, std::ostream* csv,
                  const std::function<void(const Trainer&)>& on_checkpoint) {
  if (csv != nullptr && csv->tellp() <= 0) *csv << kMetricsHeader << "\n";
  while (iteration_ < iterations) {
    step();
    const bool due = config_.eval_interval > 0 && iteration_ % config_.eval_interval == 0;
    if (due || (iteration_ == iterations && interval_steps_ > 0)) {
      const MetricsRow row = log_row();
      if (csv != nullptr) *csv << format_metrics_row(row) << "\n" << std::flush;
    }
    if (on_checkpoint && config_.checkpoint_interval > 0 && iteration_ % config_.checkpoint_interval == 0) {
      on_checkpoint(*this);
    }
  }
}

void Trainer::save(const std::string& path) const {
  Checkpoint c;
  c.config_text = format_config(config_);
  c.params = params_;
  c.adam_step = adam_.step;
  c.adam_beta1 = adam_.beta1;
  c.adam_beta2 = adam_.beta2;
  c.adam_epsilon = adam_.epsilon;
  c.adam_m = adam_.m;
  c.adam_v = adam_.v;
  c.iteration = iteration_;
  c.rng_state = rng_.state();
  save_checkpoint(c, path);
}

Trainer Trainer::load(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  Trainer t(parse_config(c.config_text));
  t.model_.check_params(c.params);
  t.params_ = std::move(c.params);
  t.adam_.step = c.adam_step;
  t.adam_.beta1 = c.adam_beta1;
  t.adam_.beta2 = c.adam_beta2;
  t.adam_.epsilon = c.adam_epsilon;
  t.adam_.m = std::move(c.adam_m);
  t.adam_.v = std::move(c.adam_v);
  t.iteration_ = c.iteration;
  t.trace_offset_ = c.iteration;
  t.rng_.set_state(c.rng_state);
  return t;
}

}  // namespace anp
