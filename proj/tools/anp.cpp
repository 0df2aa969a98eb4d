// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// anp: train, evaluate, predict with and run Bayesian optimization on neural
// process models; generate synthetic datasets.
//
// Exit codes: 0 success, 1 unexpected failure, 2 bad configuration or input,
// 3 non-finite training loss.

#include "anp/bo.hpp"
#include "anp/checkpoint.hpp"
#include "anp/config.hpp"
#include "anp/gp.hpp"
#include "anp/image.hpp"
#include "anp/metrics.hpp"
#include "anp/train.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace anp;

namespace {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string default_out_dir() {
  const char* env = std::getenv("ANP_OUT_DIR");
  return env != nullptr && *env != '\0' ? env : "anp_out";
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void json_rows(std::ostream& out, const Tensor& t) {
  out << "[";
  for (std::size_t r = 0; r < t.rows(); ++r) {
    out << (r ? "," : "") << "[";
    for (std::size_t c = 0; c < t.cols(); ++c) out << (c ? "," : "") << g17(t(r, c));
    out << "]";
  }
  out << "]";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return cells;
}

/// Header `x0[,x1],y0[,y1,...]`, one point per line.
std::pair<Tensor, Tensor> read_context_csv(const std::string& path, std::size_t dx, std::size_t dy) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open context file " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError("context file " + path + " has no header");
  const auto header = split_csv(line);
  std::size_t hx = 0;
  std::size_t hy = 0;
  for (const auto& h : header) {
    if (!h.empty() && h[0] == 'x') ++hx;
    else if (!h.empty() && h[0] == 'y') ++hy;
    else throw InputError("context header column '" + h + "' is neither x<i> nor y<i>");
  }
  if (hx != dx || hy != dy) {
    throw InputError("context file has " + std::to_string(hx) + " x and " + std::to_string(hy) +
                     " y columns; the model expects " + std::to_string(dx) + " and " + std::to_string(dy));
  }
  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != dx + dy) throw InputError("context line " + std::to_string(lineno) + ": wrong column count");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(cells[i], &used);
        if (used != cells[i].size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw InputError("context line " + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
      }
      (i < dx ? xs : ys).push_back(v);
    }
  }
  const std::size_t n = xs.size() / dx;
  return {Tensor(Shape{n, dx}, std::move(xs)), Tensor(Shape{n, dy}, std::move(ys))};
}

Tensor read_targets(const std::string& spec, const TrainConfig& cfg, std::size_t dx) {
  if (spec.rfind("grid:", 0) == 0) {
    const std::string arg = spec.substr(5);
    if (dx == 1) {
      const std::size_t n = std::stoul(arg);
      if (n < 2) throw InputError("grid needs at least 2 points");
      return bo_grid(n, cfg.x_min, cfg.x_max);
    }
    const auto cross = arg.find('x');
    const std::size_t h = std::stoul(arg.substr(0, cross));
    const std::size_t w = cross == std::string::npos ? h : std::stoul(arg.substr(cross + 1));
    return make_grid(h, w);
  }
  if (spec.rfind("file:", 0) == 0) {
    std::ifstream in(spec.substr(5));
    if (!in) throw InputError("cannot open target file " + spec.substr(5));
    std::string line;
    std::getline(in, line);
    std::vector<double> xs;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto cells = split_csv(line);
      if (cells.size() < dx) throw InputError("target file: too few columns");
      for (std::size_t i = 0; i < dx; ++i) xs.push_back(std::stod(cells[i]));
    }
    const std::size_t n = xs.size() / dx;
    return Tensor(Shape{n, dx}, std::move(xs));
  }
  throw InputError("--targets must be grid:N, grid:HxW or file:PATH");
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const NonFiniteLoss& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IdxError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural processes with attention: training, prediction, evaluation and Bayesian optimization"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a model from a key = value config file");
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::size_t> iterations_override;
  std::string out_dir;
  std::string resume_path;
  std::vector<std::string> sets;
  train->add_option("--config", config_path, "Config file")->required();
  train->add_option("--seed", seed_override, "Override the seed");
  train->add_option("--iterations", iterations_override, "Override the iteration count");
  train->add_option("--out", out_dir, "Output directory (default $ANP_OUT_DIR or ./anp_out)");
  train->add_option("--set", sets, "Override a config key, key=value; repeatable");
  train->add_option("--resume", resume_path, "Continue from a checkpoint instead of initializing");

  // predict
  auto* predict = app.add_subcommand("predict", "Predictive distributions as JSON");
  std::string ckpt_path;
  std::string context_path;
  std::string targets_spec;
  std::size_t z_samples = 1;
  std::uint64_t seed = 0;
  std::string out_file;
  predict->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  predict->add_option("--context", context_path, "Context CSV, header x0[,x1],y0[,...]")->required();
  predict->add_option("--targets", targets_spec, "grid:N, grid:HxW or file:PATH")->required();
  predict->add_option("--z-samples", z_samples, "Latent samples")->check(CLI::PositiveNumber);
  predict->add_option("--seed", seed, "Seed");
  predict->add_option("--out", out_file, "Output JSON (default stdout)");

  // eval
  auto* eval = app.add_subcommand("eval", "Mean and standard error of both NLL metrics");
  std::size_t episodes = 64;
  eval->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  eval->add_option("--episodes", episodes, "Held-out episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "Seed");

  // bo
  auto* bo = app.add_subcommand("bo", "Thompson-sampling minimization of GP test functions");
  std::size_t functions = 100;
  std::size_t bo_iterations = 30;
  bool oracle = false;
  bo->add_option("--ckpt", ckpt_path, "Checkpoint (omit with --oracle)");
  bo->add_option("--functions", functions, "Test functions")->check(CLI::PositiveNumber);
  bo->add_option("--iterations", bo_iterations, "Queries per function")->check(CLI::PositiveNumber);
  bo->add_option("--seed", seed, "Seed");
  bo->add_option("--out", out_file, "Regret CSV (default $ANP_OUT_DIR/bo.csv)");
  bo->add_flag("--oracle", oracle, "Use the exact GP posterior as the surrogate");

  // gen-images
  auto* gen_images = app.add_subcommand("gen-images", "Write a synthetic shapes dataset in IDX format");
  std::size_t count = 1000;
  std::size_t height = 8;
  std::size_t width = 8;
  gen_images->add_option("--count", count, "Images")->check(CLI::PositiveNumber);
  gen_images->add_option("--seed", seed, "Seed");
  gen_images->add_option("--height", height, "Rows")->check(CLI::Range(2, 4096));
  gen_images->add_option("--width", width, "Columns")->check(CLI::Range(2, 4096));
  gen_images->add_option("--out", out_file, "Output .idx file")->required();

  // gen-episodes
  auto* gen_episodes = app.add_subcommand("gen-episodes", "Write GP episodes as JSON");
  std::string kernel = "fixed";
  gen_episodes->add_option("--count", count, "Episodes")->check(CLI::PositiveNumber);
  gen_episodes->add_option("--seed", seed, "Seed");
  gen_episodes->add_option("--kernel", kernel, "fixed or random")->check(CLI::IsMember({"fixed", "random"}));
  gen_episodes->add_option("--out", out_file, "Output JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*train) {
    return guarded([&] {
      TrainConfig cfg = load_config_file(config_path);
      if (seed_override) cfg.seed = *seed_override;
      if (iterations_override) cfg.iterations = *iterations_override;
      for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      try {
        cfg.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
      const fs::path dir = out_dir.empty() ? default_out_dir() : out_dir;
      fs::create_directories(dir);
      {
        std::ofstream echo(dir / "config.cfg");
        echo << format_config(cfg);
      }
      Trainer trainer = resume_path.empty() ? Trainer(cfg) : Trainer::load(resume_path);
      if (!resume_path.empty()) {
        trainer.set_iterations(cfg.iterations);
        if (format_config(trainer.config()) != format_config(cfg)) {
          std::cerr << "note: resuming with the checkpoint's configuration\n";
        }
      }
      std::ofstream csv(dir / "metrics.csv", resume_path.empty() ? std::ios::trunc : std::ios::app);
      trainer.run(cfg.iterations, &csv, [&](const Trainer& t) {
        t.save((dir / ("ckpt_" + std::to_string(t.iteration()) + ".ckpt")).string());
      });
      trainer.save((dir / "final.ckpt").string());
      if (!trainer.metrics().empty()) {
        const MetricsRow& r = trainer.metrics().back();
        std::cout << "iteration " << r.iteration << "  train_loss " << r.train_loss << "  ctx_recon_nll "
                  << r.ctx_recon_nll << "  tgt_nll " << r.tgt_nll << "\n";
      }
      return 0;
    });
  }

  if (*predict) {
    return guarded([&] {
      const Trainer t = Trainer::load(ckpt_path);
      const ModelConfig& mc = t.model().config();
      auto [xc, yc] = read_context_csv(context_path, mc.x_dim, mc.y_dim);
      const Tensor xt = read_targets(targets_spec, t.config(), mc.x_dim);
      Rng rng(seed);
      const auto preds = t.model().predict(t.params(), xc, yc, xt, z_samples, rng);
      std::ostringstream os;
      os << "{\"num_context\":" << xc.rows() << ",\"num_target\":" << xt.rows() << ",\"z_samples\":" << preds.size()
         << ",\"x\":";
      json_rows(os, xt);
      os << ",\"predictions\":[";
      for (std::size_t i = 0; i < preds.size(); ++i) {
        os << (i ? "," : "") << "{\"mean\":";
        json_rows(os, preds[i].mean);
        os << ",\"stddev\":";
        json_rows(os, preds[i].stddev);
        os << "}";
      }
      os << "]}\n";
      if (out_file.empty()) {
        std::cout << os.str();
      } else {
        std::ofstream out(out_file);
        if (!out) throw InputError("cannot write " + out_file);
        out << os.str();
      }
      return 0;
    });
  }

  if (*eval) {
    return guarded([&] {
      const Trainer t = Trainer::load(ckpt_path);
      const EvalSummary s = t.evaluate(episodes, seed);
      std::cout << "ctx_recon_nll " << g17(s.ctx_mean) << " +- " << g17(s.ctx_stderr) << "\n";
      std::cout << "tgt_nll " << g17(s.tgt_mean) << " +- " << g17(s.tgt_stderr) << "\n";
      return 0;
    });
  }

  if (*bo) {
    return guarded([&] {
      if (!oracle && ckpt_path.empty()) throw InputError("bo needs --ckpt or --oracle");
      std::optional<Trainer> t;
      GPHyperparams hyp;
      if (!ckpt_path.empty()) {
        t.emplace(Trainer::load(ckpt_path));
        if (t->config().dataset != DatasetKind::GP) throw InputError("bo needs a model trained on GP curves");
        hyp = t->config().gp;
      }
      const Surrogate surrogate = oracle ? oracle_surrogate(hyp) : model_surrogate(t->model(), t->params());
      const fs::path path = out_file.empty() ? fs::path(default_out_dir()) / "bo.csv" : fs::path(out_file);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      std::ofstream csv(path);
      if (!csv) throw InputError("cannot write " + path.string());
      csv << kBOHeader << "\n";
      Rng problems(derive_seed(seed, 0));
      Rng policy(derive_seed(seed, 1));
      double final_regret = 0.0;
      for (std::size_t f = 0; f < functions; ++f) {
        const BOProblem problem = sample_bo_problem(hyp, problems);
        const BOTrace trace = thompson_bo(problem, bo_iterations, surrogate, policy);
        check_trace(trace);
        write_bo_rows(csv, f, trace);
        final_regret += trace.simple_regret.back();
      }
      std::cout << "mean final simple regret " << g17(final_regret / static_cast<double>(functions)) << "\n";
      return 0;
    });
  }

  if (*gen_images) {
    return guarded([&] {
      Rng rng(seed);
      write_idx(out_file, synthetic_shapes(count, height, width, rng));
      return 0;
    });
  }

  if (*gen_episodes) {
    return guarded([&] {
      EpisodeSpec spec;
      spec.mode = kernel == "fixed" ? HyperMode::Fixed : HyperMode::Random;
      Rng rng(seed);
      std::vector<GPEpisode> eps;
      for (std::size_t i = 0; i < count; ++i) eps.push_back(sample_episode(spec, rng));
      const std::string text = dump_episodes(eps);
      if (out_file.empty()) {
        std::cout << text << "\n";
      } else {
        std::ofstream out(out_file);
        out << text << "\n";
      }
      return 0;
    });
  }
  return 1;
}
