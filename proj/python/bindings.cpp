// SPDX-License-Identifier: Apache-2.0
//
// Python surface over the core: dataset generation and sampling, the
// augmentation ops, the loss family, the LARS schedule, the kNN probe, and
// the pretrain/eval entry points.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "vidistill/plots.hpp"
#include "vidistill/trainer.hpp"

namespace py = pybind11;
using namespace vidistill;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<int64_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = a.shape(i);
  std::vector<double> data(a.data(), a.data() + a.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data(), t.data() + t.numel(), out.mutable_data());
  return out;
}

RunConfig config_from_obj(const py::object& obj) {
  nlohmann::json defaults = to_json(RunConfig{});
  if (obj.is_none()) return config_from_json(defaults);
  nlohmann::json tree;
  if (py::isinstance<py::str>(obj)) {
    tree = nlohmann::json::parse(obj.cast<std::string>());
  } else {
    py::module json_mod = py::module::import("json");
    tree = nlohmann::json::parse(json_mod.attr("dumps")(obj).cast<std::string>());
  }
  // Fill unspecified fields with defaults, then re-validate.
  RunConfig partial = config_from_json(tree);
  return config_from_json(to_json(partial));
}

Clip clip_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& frames,
                     const std::string& source_id, int64_t start, int64_t stride) {
  if (frames.ndim() != 4 || frames.shape(3) != 3)
    throw std::invalid_argument("clip frames must have shape [T, H, W, 3]");
  Clip c;
  c.frames = tensor_from_array(frames);
  c.source_id = source_id;
  c.start = start;
  c.stride = stride;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Self-supervised video pretraining against frozen image targets";

  // ---------------------------------------------------------- dataset
  m.def(
      "make_synthetic_dataset",
      [](int64_t num_classes, int64_t videos_per_class, int64_t raw_frames, int64_t spatial_size,
         uint64_t seed) {
        py::list out;
        for (const auto& r :
             make_synthetic_dataset(num_classes, videos_per_class, raw_frames, spatial_size,
                                    seed)) {
          py::dict d;
          d["id"] = r.id;
          d["label"] = r.label ? py::cast(*r.label) : py::none();
          d["split"] = r.split == Split::train ? "train" : "val";
          py::array_t<uint8_t> frames({r.num_frames, r.height, r.width, static_cast<int64_t>(3)});
          std::copy(r.frames.begin(), r.frames.end(), frames.mutable_data());
          d["frames"] = frames;
          out.append(d);
        }
        return out;
      },
      py::arg("num_classes"), py::arg("videos_per_class"), py::arg("raw_frames") = 64,
      py::arg("spatial_size") = 32, py::arg("seed") = 0);

  m.def(
      "sample_clip",
      [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& frames, int64_t T,
         int64_t tau, uint64_t seed) {
        if (frames.ndim() != 4 || frames.shape(3) != 3)
          throw std::invalid_argument("frames must have shape [N, H, W, 3]");
        VideoRecord rec;
        rec.id = "array";
        rec.num_frames = frames.shape(0);
        rec.height = frames.shape(1);
        rec.width = frames.shape(2);
        rec.frames.assign(frames.data(), frames.data() + frames.size());
        SeedStream rng(seed);
        Clip c = sample_clip(rec, T, tau, rng);
        return py::make_tuple(array_from_tensor(c.frames), c.start, c.stride);
      },
      py::arg("frames"), py::arg("T"), py::arg("tau"), py::arg("seed") = 0,
      "Returns (clip_frames [T,H,W,3] in [0,1], start, stride).");

  // ---------------------------------------------------------- augment
  m.def(
      "gaussian_blur",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& frame,
         double sigma) { return array_from_tensor(gaussian_blur(tensor_from_array(frame), sigma)); },
      py::arg("frame"), py::arg("sigma"));

  m.def(
      "color_jitter",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& frame, double b,
         double c, double s, double h) {
        return array_from_tensor(color_jitter(tensor_from_array(frame), b, c, s, h));
      },
      py::arg("frame"), py::arg("brightness"), py::arg("contrast"), py::arg("saturation"),
      py::arg("hue"));

  m.def(
      "augment_clip",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& frames,
         uint64_t seed, const py::object& config) {
        AugConfig cfg;
        if (!config.is_none()) {
          RunConfig rc = config_from_obj(config);
          cfg = rc.augment;
        }
        Clip c = clip_from_array(frames, "array", 0, 1);
        SeedStream rng(seed);
        AugParams p = draw_aug_params(cfg, c.frames.dim(1), c.frames.dim(2), rng);
        return array_from_tensor(apply_aug(c, p).frames);
      },
      py::arg("frames"), py::arg("seed") = 0, py::arg("config") = py::none(),
      "One consistent augmentation draw applied to every frame of the clip.");

  // ---------------------------------------------------------- objective
  m.def(
      "cosine_distance",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& q,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& k) {
        return cosine_distance(tensor_from_array(q), tensor_from_array(k));
      },
      py::arg("q"), py::arg("k"));

  m.def(
      "temporal_pool",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& features) {
        return array_from_tensor(temporal_pool(tensor_from_array(features)));
      },
      py::arg("features"));

  m.def(
      "prediction_loss",
      [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& q_views,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& k_ref, bool pool) {
        std::vector<Tensor> qs;
        for (const auto& q : q_views) qs.push_back(tensor_from_array(q));
        auto res = ::vidistill::prediction_loss(qs, tensor_from_array(k_ref), pool);
        py::list grads;
        for (const auto& g : res.grad_q) grads.append(array_from_tensor(g));
        return py::make_tuple(res.value, grads);
      },
      py::arg("q_views"), py::arg("k_ref"), py::arg("temporal_pool") = true,
      "Returns (loss, [dloss/dq per view]); the target side is stop-gradient.");

  // ---------------------------------------------------------- optim
  m.def(
      "base_lr",
      [](double coefficient, int64_t batch_size) {
        OptimConfig cfg;
        cfg.base_lr_coefficient = coefficient;
        cfg.batch_size = batch_size;
        return base_lr(cfg);
      },
      py::arg("coefficient") = 2.4, py::arg("batch_size") = 16);

  m.def(
      "lr_at",
      [](int64_t step, int64_t steps_per_epoch, double coefficient, int64_t batch_size,
         int64_t warmup_epochs, int64_t total_epochs, double min_lr) {
        OptimConfig cfg;
        cfg.base_lr_coefficient = coefficient;
        cfg.batch_size = batch_size;
        cfg.warmup_epochs = warmup_epochs;
        cfg.total_epochs = total_epochs;
        cfg.min_lr = min_lr;
        return lr_at(step, steps_per_epoch, cfg);
      },
      py::arg("step"), py::arg("steps_per_epoch"), py::arg("coefficient") = 2.4,
      py::arg("batch_size") = 16, py::arg("warmup_epochs") = 8, py::arg("total_epochs") = 30,
      py::arg("min_lr") = 0.0);

  // ---------------------------------------------------------- eval
  m.def(
      "knn_classify",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& features,
         const std::vector<int64_t>& labels,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& query, int64_t k,
         double temperature) {
        FeatureBank bank;
        bank.features = tensor_from_array(features);
        bank.labels = labels;
        for (int64_t i = 0; i < bank.size(); ++i) bank.ids.push_back(std::to_string(i));
        auto [pred, scores] = knn_classify(bank, tensor_from_array(query), k, temperature);
        return py::make_tuple(pred, scores);
      },
      py::arg("features"), py::arg("labels"), py::arg("query"), py::arg("k") = 20,
      py::arg("temperature") = 0.07,
      "Weighted kNN vote over unit-norm rows; returns (label, per-class scores).");

  m.def(
      "semi_split",
      [](const std::vector<int64_t>& labels, double fraction, uint64_t seed) {
        std::vector<VideoRecord> recs(labels.size());
        for (size_t i = 0; i < labels.size(); ++i) {
          recs[i].id = std::to_string(i);
          recs[i].label = labels[i];
        }
        return semi_split(recs, fraction, seed);
      },
      py::arg("labels"), py::arg("fraction"), py::arg("seed") = 0,
      "Stratified subset indices: per class max(1, round-half-even(fraction * count)).");

  // ---------------------------------------------------------- harness
  m.def("default_config",
        []() { return to_json(RunConfig{}).dump(2); });

  m.def(
      "pretrain",
      [](const py::object& config, const std::string& resume) {
        RunConfig cfg = config_from_obj(config);
        PretrainResult res = run_pretrain(cfg, resume);
        py::dict out;
        out["checkpoint_path"] = res.checkpoint_path;
        out["metrics_path"] = res.metrics_path;
        out["final_loss"] = res.final_loss;
        out["steps"] = res.steps;
        return out;
      },
      py::arg("config") = py::none(), py::arg("resume") = std::string());

  m.def(
      "evaluate",
      [](const py::object& config, const std::string& checkpoint, const std::string& protocol) {
        RunConfig cfg = config_from_obj(config);
        EvalReport rep = run_eval(cfg, checkpoint, protocol);
        py::dict out;
        out["protocol"] = rep.protocol;
        out["top1"] = rep.top1;
        out["per_class"] = rep.per_class;
        out["wall_seconds"] = rep.wall_seconds;
        return out;
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("protocol"));

  m.def("emit_plots", &emit_plots, py::arg("log_path"), py::arg("out_dir"));
}
