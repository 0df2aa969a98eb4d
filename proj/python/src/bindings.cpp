// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Python module _anp. Tensors cross the boundary as float64 numpy arrays
// (copied), parameter stores as dicts of arrays.

#include "anp/bo.hpp"
#include "anp/checkpoint.hpp"
#include "anp/config.hpp"
#include "anp/gp.hpp"
#include "anp/image.hpp"
#include "anp/metrics.hpp"
#include "anp/model.hpp"
#include "anp/train.hpp"

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace anp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  if (shape.size() > 2) throw std::invalid_argument("arrays of rank > 2 are not supported");
  Tensor t(shape);
  std::memcpy(t.data(), a.data(), t.size() * sizeof(double));
  return t;
}

/// 2-D [n, 1] view of a 1-D array of inputs.
Tensor to_column(const Array& a) {
  Tensor t = to_tensor(a);
  return t.rank() == 1 ? t.reshaped({t.size(), 1}) : t;
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array a(shape);
  std::memcpy(a.mutable_data(), t.data(), t.size() * sizeof(double));
  return a;
}

py::dict to_dict(const ParamStore& store) {
  py::dict d;
  for (const auto& [name, t] : store) d[py::str(name)] = to_array(t);
  return d;
}

ParamStore to_store(const py::dict& d) {
  ParamStore s;
  for (const auto& [k, v] : d) s[k.cast<std::string>()] = to_tensor(v.cast<Array>());
  return s;
}

py::dict episode_dict(const Episode& e) {
  py::dict d;
  d["x_context"] = to_array(e.x_context);
  d["y_context"] = to_array(e.y_context);
  d["x_target"] = to_array(e.x_target);
  d["y_target"] = to_array(e.y_target);
  d["context_indices"] = e.context_indices;
  return d;
}

Episode dict_episode(const py::dict& d) {
  return make_episode(to_tensor(d["x_target"].cast<Array>()), to_tensor(d["y_target"].cast<Array>()),
                      d["context_indices"].cast<std::vector<std::size_t>>());
}

GPHyperparams hyper(double l, double sf, double sn) {
  GPHyperparams h{l, sf, sn};
  h.validate();
  return h;
}

}  // namespace

PYBIND11_MODULE(_anp, m) {
  m.doc() = "Neural processes with attention";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);
  py::register_exception<IdxError>(m, "IdxError", PyExc_ValueError);
  py::register_exception<CholeskyError>(m, "CholeskyError", PyExc_ArithmeticError);

  // GP curves ---------------------------------------------------------------

  m.def(
      "se_kernel",
      [](const Array& x1, const Array& x2, double l, double sf) {
        return to_array(se_kernel(to_column(x1), to_column(x2), hyper(l, sf, 1.0)));
      },
      py::arg("x1"), py::arg("x2"), py::arg("length_scale") = 0.6, py::arg("signal_scale") = 1.0);

  m.def(
      "sample_curve",
      [](const Array& xs, std::uint64_t seed, double l, double sf, double sn) {
        Rng rng(seed);
        return to_array(sample_curve(hyper(l, sf, sn), to_column(xs), rng));
      },
      py::arg("xs"), py::arg("seed"), py::arg("length_scale") = 0.6, py::arg("signal_scale") = 1.0,
      py::arg("noise_std") = 0.02);

  m.def(
      "gp_posterior",
      [](const Array& xc, const Array& yc, const Array& xq, double l, double sf, double sn) {
        const GPPosterior p = gp_posterior(hyper(l, sf, sn), to_column(xc), to_column(yc), to_column(xq));
        return py::make_tuple(to_array(p.mean), to_array(p.variance));
      },
      py::arg("x_context"), py::arg("y_context"), py::arg("x_query"), py::arg("length_scale") = 0.6,
      py::arg("signal_scale") = 1.0, py::arg("noise_std") = 0.02,
      "Posterior mean and latent variance, each [q, 1].");

  m.def(
      "sample_episode",
      [](std::uint64_t seed, bool random_kernel, std::size_t max_points) {
        EpisodeSpec spec;
        spec.mode = random_kernel ? HyperMode::Random : HyperMode::Fixed;
        spec.max_points = max_points;
        spec.validate();
        Rng rng(seed);
        const GPEpisode g = sample_episode(spec, rng);
        py::dict d = episode_dict(g.episode);
        d["length_scale"] = g.hyperparams.length_scale;
        d["signal_scale"] = g.hyperparams.signal_scale;
        d["noise_std"] = g.hyperparams.noise_std;
        return d;
      },
      py::arg("seed"), py::arg("random_kernel") = false, py::arg("max_points") = 100);

  m.def(
      "oracle_nll",
      [](const py::dict& episode, double l, double sf, double sn) {
        const EpisodeNll n = oracle_nll(hyper(l, sf, sn), dict_episode(episode));
        return py::make_tuple(n.context, n.target);
      },
      py::arg("episode"), py::arg("length_scale") = 0.6, py::arg("signal_scale") = 1.0,
      py::arg("noise_std") = 0.02);

  // Images ------------------------------------------------------------------

  m.def("make_grid", [](std::size_t h, std::size_t w) { return to_array(make_grid(h, w)); }, py::arg("height"),
        py::arg("width"));

  m.def(
      "synthetic_shapes",
      [](std::size_t count, std::size_t h, std::size_t w, std::uint64_t seed) {
        Rng rng(seed);
        const ImageDataset ds = synthetic_shapes(count, h, w, rng);
        py::array_t<std::uint8_t> out({count, h, w});
        std::memcpy(out.mutable_data(), ds.pixels.data(), ds.pixels.size());
        return out;
      },
      py::arg("count"), py::arg("height") = 8, py::arg("width") = 8, py::arg("seed") = 0,
      "uint8 array [count, height, width].");

  m.def(
      "load_idx",
      [](const std::string& path) {
        const ImageDataset ds = load_idx(path);
        py::array_t<std::uint8_t> out({ds.count, ds.height, ds.width});
        std::memcpy(out.mutable_data(), ds.pixels.data(), ds.pixels.size());
        return out;
      },
      py::arg("path"));

  // Model -------------------------------------------------------------------

  py::class_<NeuralProcess>(m, "NeuralProcess")
      .def(py::init([](std::size_t x_dim, std::size_t y_dim, std::size_t width, const std::string& attention,
                       std::size_t heads, std::size_t self_attention_layers) {
             ModelConfig c;
             c.x_dim = x_dim;
             c.y_dim = y_dim;
             c.width = width;
             c.attention = parse_attention_kind(attention);
             c.heads = heads;
             c.self_attention_layers = self_attention_layers;
             return NeuralProcess(c);
           }),
           py::arg("x_dim") = 1, py::arg("y_dim") = 1, py::arg("width") = 128, py::arg("attention") = "multihead",
           py::arg("heads") = 8, py::arg("self_attention_layers") = 0)
      .def_property_readonly("attention", [](const NeuralProcess& np) { return to_string(np.config().attention); })
      .def_property_readonly("width", [](const NeuralProcess& np) { return np.config().width; })
      .def(
          "init_params",
          [](const NeuralProcess& np, std::uint64_t seed) {
            Rng rng(seed);
            return to_dict(np.init_params(rng));
          },
          py::arg("seed") = 0)
      .def(
          "predict",
          [](const NeuralProcess& np, const py::dict& params, const Array& xc, const Array& yc, const Array& xt,
             std::size_t z_samples, std::uint64_t seed) {
            const ParamStore store = to_store(params);
            np.check_params(store);
            Rng rng(seed);
            py::list out;
            for (const Prediction& p : np.predict(store, to_tensor(xc), to_tensor(yc), to_tensor(xt), z_samples, rng)) {
              out.append(py::make_tuple(to_array(p.mean), to_array(p.stddev)));
            }
            return out;
          },
          py::arg("params"), py::arg("x_context"), py::arg("y_context"), py::arg("x_target"),
          py::arg("z_samples") = 1, py::arg("seed") = 0, "List of (mean, stddev) pairs, one per latent sample.")
      .def(
          "elbo_loss",
          [](const NeuralProcess& np, const py::dict& params, const py::dict& episode, const Array& noise) {
            const ParamStore store = to_store(params);
            Graph g;
            Params p(g, store);
            const Tensor eps = to_tensor(noise);
            const Var loss =
                np.elbo_loss(p, dict_episode(episode), std::span<const double>(eps.data(), eps.size()));
            g.backward(loss);
            return py::make_tuple(loss.value().item(), to_dict(p.gradients()));
          },
          py::arg("params"), py::arg("episode"), py::arg("noise"), "Loss and gradient dict.")
      .def(
          "episode_nll",
          [](const NeuralProcess& np, const py::dict& params, const py::dict& episode, std::uint64_t seed) {
            Rng rng(seed);
            const EpisodeNll n = episode_nll(np, to_store(params), dict_episode(episode), rng);
            return py::make_tuple(n.context, n.target);
          },
          py::arg("params"), py::arg("episode"), py::arg("seed") = 0,
          "(context reconstruction NLL, target NLL).");

  // Training ----------------------------------------------------------------

  m.def("parse_config", [](const std::string& text) { return format_config(parse_config(text)); }, py::arg("text"),
        "Validated configuration with every key written out.");

  py::class_<Trainer>(m, "Trainer")
      .def(py::init([](const std::string& config_text) { return Trainer(parse_config(config_text)); }),
           py::arg("config_text"))
      .def_static("load", &Trainer::load, py::arg("path"))
      .def_property_readonly("iteration", &Trainer::iteration)
      .def_property_readonly("loss_trace", &Trainer::loss_trace)
      .def_property_readonly("config_text", [](const Trainer& t) { return format_config(t.config()); })
      .def_property_readonly("params", [](const Trainer& t) { return to_dict(t.params()); })
      .def_property_readonly("model", [](const Trainer& t) { return t.model(); })
      .def("step", &Trainer::step)
      .def("run", [](Trainer& t, std::size_t until) { t.run(until); }, py::arg("until"),
           "Step until the total iteration count reaches `until`.")
      .def(
          "metrics",
          [](const Trainer& t) {
            py::list rows;
            for (const MetricsRow& r : t.metrics()) {
              py::dict d;
              d["iteration"] = r.iteration;
              d["wall_clock_s"] = r.wall_clock_s;
              d["train_loss"] = r.train_loss;
              d["ctx_recon_nll"] = r.ctx_recon_nll;
              d["tgt_nll"] = r.tgt_nll;
              d["kl"] = r.kl;
              rows.append(d);
            }
            return rows;
          })
      .def(
          "evaluate",
          [](const Trainer& t, std::size_t episodes, std::uint64_t seed) {
            const EvalSummary s = t.evaluate(episodes, seed);
            py::dict d;
            d["ctx_recon_nll"] = s.ctx_mean;
            d["ctx_stderr"] = s.ctx_stderr;
            d["tgt_nll"] = s.tgt_mean;
            d["tgt_stderr"] = s.tgt_stderr;
            return d;
          },
          py::arg("episodes") = 64, py::arg("seed") = 0)
      .def("save", &Trainer::save, py::arg("path"));

  // Bayesian optimization ---------------------------------------------------

  m.def(
      "thompson_bo",
      [](const py::object& trainer, std::size_t functions, std::size_t iterations, std::uint64_t seed) {
        GPHyperparams hyp;
        Surrogate surrogate;
        if (trainer.is_none()) {
          surrogate = oracle_surrogate(hyp);
        } else {
          const Trainer& t = trainer.cast<const Trainer&>();
          hyp = t.config().gp;
          surrogate = model_surrogate(t.model(), t.params());
        }
        Rng problems(derive_seed(seed, 0));
        Rng policy(derive_seed(seed, 1));
        py::list traces;
        for (std::size_t f = 0; f < functions; ++f) {
          const BOTrace tr = thompson_bo(sample_bo_problem(hyp, problems), iterations, surrogate, policy);
          check_trace(tr);
          py::dict d;
          d["x"] = tr.x;
          d["y"] = tr.y;
          d["simple_regret"] = tr.simple_regret;
          d["cumulative_regret"] = tr.cumulative_regret;
          traces.append(d);
        }
        return traces;
      },
      py::arg("trainer"), py::arg("functions") = 1, py::arg("iterations") = 30, py::arg("seed") = 0,
      "Pass None for the exact GP posterior surrogate.");
}
