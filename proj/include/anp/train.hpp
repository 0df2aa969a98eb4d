// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "anp/gp.hpp"
#include "anp/image.hpp"
#include "anp/mlp.hpp"
#include "anp/model.hpp"
#include "anp/rng.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace anp {

enum class DatasetKind { GP, Images };
enum class ImageSource { Synthetic, Idx };

struct TrainConfig {
  ModelConfig model{};

  std::size_t batch_size = 16;
  double learning_rate = 5e-5;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  std::size_t eval_interval = 100;
  std::size_t eval_episodes = 64;
  std::size_t checkpoint_interval = 0;  // 0: final checkpoint only

  DatasetKind dataset = DatasetKind::GP;
  std::size_t min_context = 3;
  std::size_t max_points = 100;

  // GP curves.
  HyperMode kernel = HyperMode::Fixed;
  GPHyperparams gp{};
  double length_scale_min = 0.1;
  double length_scale_max = 0.6;
  double signal_scale_min = 0.1;
  double signal_scale_max = 1.0;
  double x_min = -2.0;
  double x_max = 2.0;

  // Images.
  ImageSource image_source = ImageSource::Synthetic;
  std::string image_train_path;
  std::string image_test_path;  // empty: evaluate on the training images
  std::size_t image_height = 8;
  std::size_t image_width = 8;
  std::size_t synthetic_train_count = 2000;
  std::size_t synthetic_test_count = 200;
  std::uint64_t synthetic_seed = 7;  // independent of the training seed

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;

  EpisodeSpec gp_spec() const;
  PixelEpisodeSpec pixel_spec() const;
  /// model with x_dim/y_dim filled in from the dataset.
  ModelConfig resolved_model(std::size_t image_channels = 1) const;
};

/// Episodes for training and for held-out evaluation.
class EpisodeSource {
 public:
  explicit EpisodeSource(const TrainConfig& config);

  Episode train_episode(Rng& rng) const;
  Episode eval_episode(Rng& rng) const;
  std::size_t y_dim() const;

  const ImageDataset* train_images() const { return train_images_.get(); }
  const ImageDataset* test_images() const { return test_images_.get(); }

 private:
  DatasetKind kind_;
  EpisodeSpec gp_;
  PixelEpisodeSpec pixel_;
  std::shared_ptr<const ImageDataset> train_images_;
  std::shared_ptr<const ImageDataset> test_images_;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  ParamStore m;
  ParamStore v;
};

/// Kingma-Ba update with bias correction:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Moments are created on the first call. Throws ShapeError on any mismatch.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, double lr);

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::size_t iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

struct MetricsRow {
  std::size_t iteration = 0;
  double wall_clock_s = 0.0;
  double train_loss = 0.0;  // mean over the iterations since the previous row
  double ctx_recon_nll = 0.0;
  double tgt_nll = 0.0;
  double kl = 0.0;          // mean over the same iterations and episodes
};

constexpr const char* kMetricsHeader = "iteration,wall_clock_s,train_loss,ctx_recon_nll,tgt_nll,kl";
std::string format_metrics_row(const MetricsRow& row);

/// Mean context-reconstruction and target NLL over `episodes` held-out
/// episodes drawn from Rng(seed).
struct EvalSummary {
  double ctx_mean = 0.0;
  double ctx_stderr = 0.0;
  double tgt_mean = 0.0;
  double tgt_stderr = 0.0;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const { return config_; }
  const NeuralProcess& model() const { return model_; }
  const EpisodeSource& source() const { return *source_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  const AdamState& adam() const { return adam_; }
  std::size_t iteration() const { return iteration_; }
  /// Changes the recorded iteration budget, e.g. when extending a resumed run.
  void set_iterations(std::size_t iterations) { config_.iterations = iterations; }
  /// Batch losses of iterations trace_offset()+1 .. iteration(); a loaded
  /// trainer starts a fresh trace at its checkpoint iteration.
  const std::vector<double>& loss_trace() const { return loss_trace_; }
  std::size_t trace_offset() const { return trace_offset_; }
  const std::vector<MetricsRow>& metrics() const { return metrics_; }

  /// One optimizer step; returns the batch-mean loss. Throws NonFiniteLoss.
  double step();

  /// Steps until `iterations`, logging every eval_interval (and at the end).
  /// Rows go to `csv` when given; `on_checkpoint` fires every
  /// checkpoint_interval iterations.
  void run(std::size_t iterations, std::ostream* csv = nullptr,
           const std::function<void(const Trainer&)>& on_checkpoint = {});

  EvalSummary evaluate(std::size_t episodes, std::uint64_t seed) const;

  /// Persist / restore everything a resumed run needs.
  void save(const std::string& path) const;
  static Trainer load(const std::string& path);

 private:
  MetricsRow log_row();

  TrainConfig config_;
  std::shared_ptr<const EpisodeSource> source_;
  NeuralProcess model_;
  ParamStore params_;
  AdamState adam_;
  Rng rng_;
  std::size_t iteration_ = 0;
  std::vector<double> loss_trace_;
  std::vector<MetricsRow> metrics_;
  double interval_loss_ = 0.0;
  double interval_kl_ = 0.0;
  std::size_t interval_steps_ = 0;
  std::size_t trace_offset_ = 0;
  std::chrono::steady_clock::time_point start_;
};

/// Independent seed for stream `stream` of a run (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Seed of the held-out evaluation stream used for periodic logging.
std::uint64_t eval_seed(std::uint64_t seed);

}  // namespace anp
