// SPDX-License-Identifier: Apache-2.0
#include "vidistill/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace vidistill {

using nlohmann::json;

void RunConfig::validate() const {
  augment.validate();
  encoder.validate();
  optim.validate();
  if (dataset.num_classes < 1 || dataset.train_videos_per_class < 1 ||
      dataset.val_videos_per_class < 0 || dataset.raw_frames < 1 || dataset.spatial_size < 1)
    throw std::invalid_argument("RunConfig: dataset sizes must be positive");
  if (dataset.num_online_views < 0 || dataset.num_online_views > 2)
    throw std::invalid_argument("RunConfig: num_online_views must be in {0,1,2}");
  if (clip_span(encoder.clip_frames, encoder.clip_stride) > dataset.raw_frames)
    throw std::invalid_argument("RunConfig: raw_frames too small for the (T, tau) window");
  if (augment.crop_size > dataset.spatial_size &&
      augment.resize_short_lo < augment.crop_size)
    throw std::invalid_argument("RunConfig: crop_size incompatible with resize range");
  if (targets.empty()) throw std::invalid_argument("RunConfig: at least one target required");
  std::set<std::string> names;
  for (const auto& t : targets) {
    if (!names.insert(t.name).second)
      throw std::invalid_argument("RunConfig: duplicate target name '" + t.name + "'");
    if (t.kind != "random_projection" && t.kind != "oracle" && t.kind != "feature_file")
      throw std::invalid_argument("RunConfig: unknown target kind '" + t.kind + "'");
    if (t.kind == "feature_file" && t.path.empty())
      throw std::invalid_argument("RunConfig: feature_file target needs a path");
    if (t.output_dim < 1) throw std::invalid_argument("RunConfig: target output_dim must be >= 1");
  }
  loss.validate();
  if (loss.targets.size() != targets.size())
    throw std::invalid_argument("RunConfig: loss target list out of sync");
  if (ema_momentum < 0.0 || ema_momentum > 1.0)
    throw std::invalid_argument("RunConfig: ema_momentum must be in [0,1]");
  if (checkpoint_interval_epochs < 1)
    throw std::invalid_argument("RunConfig: checkpoint_interval_epochs must be >= 1");
  if (eval.knn_k < 1 || eval.knn_temperature <= 0.0)
    throw std::invalid_argument("RunConfig: invalid kNN settings");
  if (eval.semi_fraction <= 0.0 || eval.semi_fraction > 1.0)
    throw std::invalid_argument("RunConfig: semi_fraction must be in (0,1]");
  if (eval.clips < 1 || eval.bank_clips < 1)
    throw std::invalid_argument("RunConfig: eval clips must be >= 1");
  if ((eval.crops != 1 && eval.crops != 3) || (eval.bank_crops != 1 && eval.bank_crops != 3))
    throw std::invalid_argument("RunConfig: eval crops must be 1 or 3");
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["checkpoint_interval_epochs"] = c.checkpoint_interval_epochs;
  j["ema_momentum"] = c.ema_momentum;

  j["dataset"] = {{"num_classes", c.dataset.num_classes},
                  {"train_videos_per_class", c.dataset.train_videos_per_class},
                  {"val_videos_per_class", c.dataset.val_videos_per_class},
                  {"raw_frames", c.dataset.raw_frames},
                  {"spatial_size", c.dataset.spatial_size},
                  {"num_online_views", c.dataset.num_online_views},
                  {"anchored_ref", c.dataset.anchored_ref},
                  {"path", c.dataset.path}};

  j["augment"] = {{"resize_short_lo", c.augment.resize_short_lo},
                  {"resize_short_hi", c.augment.resize_short_hi},
                  {"crop_size", c.augment.crop_size},
                  {"hflip_prob", c.augment.hflip_prob},
                  {"jitter_prob", c.augment.jitter_prob},
                  {"jitter_brightness", c.augment.jitter_brightness},
                  {"jitter_contrast", c.augment.jitter_contrast},
                  {"jitter_saturation", c.augment.jitter_saturation},
                  {"jitter_hue", c.augment.jitter_hue},
                  {"grayscale_prob", c.augment.grayscale_prob},
                  {"blur_prob", c.augment.blur_prob},
                  {"blur_sigma_lo", c.augment.blur_sigma_lo},
                  {"blur_sigma_hi", c.augment.blur_sigma_hi},
                  {"interpolation", c.augment.interpolation}};

  // projector/predictor widths are a documented non-paper choice.
  j["encoder"] = {{"channels", c.encoder.channels},
                  {"spatial_strides", c.encoder.spatial_strides},
                  {"temporal_kernel", c.encoder.temporal_kernel},
                  {"spatial_kernel", c.encoder.spatial_kernel},
                  {"projector_hidden", c.encoder.projector_hidden},
                  {"projector_dim", c.encoder.projector_dim},
                  {"predictor_hidden", c.encoder.predictor_hidden},
                  {"predictor_enabled", c.encoder.predictor_enabled},
                  {"input_mean", c.encoder.input_mean},
                  {"input_std", c.encoder.input_std},
                  {"clip_frames", c.encoder.clip_frames},
                  {"clip_stride", c.encoder.clip_stride}};

  j["targets"] = json::array();
  for (const auto& t : c.targets)
    j["targets"].push_back({{"name", t.name},
                            {"kind", t.kind},
                            {"output_dim", t.output_dim},
                            {"seed", t.seed},
                            {"oracle_noise", t.oracle_noise},
                            {"path", t.path}});

  j["loss"] = {{"temporal_pool", c.loss.temporal_pool},
               {"aux_ssl", c.loss.aux_ssl},
               {"aux_weight", c.loss.aux_weight},
               {"average_targets", c.loss.average_targets}};

  j["optim"] = {{"base_lr_coefficient", c.optim.base_lr_coefficient},
                {"batch_size", c.optim.batch_size},
                {"warmup_epochs", c.optim.warmup_epochs},
                {"total_epochs", c.optim.total_epochs},
                {"weight_decay", c.optim.weight_decay},
                {"momentum", c.optim.momentum},
                {"trust_coefficient", c.optim.trust_coefficient},
                {"min_lr", c.optim.min_lr},
                {"adaptation_exclude", c.optim.adaptation_exclude}};

  j["eval"] = {{"knn_k", c.eval.knn_k},
               {"knn_temperature", c.eval.knn_temperature},
               {"clips", c.eval.clips},
               {"crops", c.eval.crops},
               {"bank_clips", c.eval.bank_clips},
               {"bank_crops", c.eval.bank_crops},
               {"resize_short", c.eval.resize_short},
               {"semi_fraction", c.eval.semi_fraction},
               {"semi_lr", c.eval.semi_lr},
               {"probe",
                {{"epochs", c.eval.probe.epochs},
                 {"warmup_epochs", c.eval.probe.warmup_epochs},
                 {"base_lr", c.eval.probe.base_lr},
                 {"batch_size", c.eval.probe.batch_size},
                 {"momentum", c.eval.probe.momentum}}},
               {"finetune",
                {{"epochs", c.eval.finetune.epochs},
                 {"warmup_epochs", c.eval.finetune.warmup_epochs},
                 {"base_lr", c.eval.finetune.base_lr},
                 {"batch_size", c.eval.finetune.batch_size},
                 {"momentum", c.eval.finetune.momentum}}}};
  return j;
}

namespace {

// Read a field if present, erroring on unknown keys at this level.
template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void check_known_keys(const json& j, const std::set<std::string>& known,
                      const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + where + it.key() + "'");
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  check_known_keys(j,
                   {"seed", "out_dir", "checkpoint_interval_epochs", "ema_momentum", "dataset",
                    "augment", "encoder", "targets", "loss", "optim", "eval"},
                   "");
  get_to(j, "seed", c.seed);
  get_to(j, "out_dir", c.out_dir);
  get_to(j, "checkpoint_interval_epochs", c.checkpoint_interval_epochs);
  get_to(j, "ema_momentum", c.ema_momentum);

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_known_keys(d,
                     {"num_classes", "train_videos_per_class", "val_videos_per_class",
                      "raw_frames", "spatial_size", "num_online_views", "anchored_ref", "path"},
                     "dataset.");
    get_to(d, "num_classes", c.dataset.num_classes);
    get_to(d, "train_videos_per_class", c.dataset.train_videos_per_class);
    get_to(d, "val_videos_per_class", c.dataset.val_videos_per_class);
    get_to(d, "raw_frames", c.dataset.raw_frames);
    get_to(d, "spatial_size", c.dataset.spatial_size);
    get_to(d, "num_online_views", c.dataset.num_online_views);
    get_to(d, "anchored_ref", c.dataset.anchored_ref);
    get_to(d, "path", c.dataset.path);
  }
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    check_known_keys(a,
                     {"resize_short_lo", "resize_short_hi", "crop_size", "hflip_prob",
                      "jitter_prob", "jitter_brightness", "jitter_contrast", "jitter_saturation",
                      "jitter_hue", "grayscale_prob", "blur_prob", "blur_sigma_lo",
                      "blur_sigma_hi", "interpolation"},
                     "augment.");
    get_to(a, "resize_short_lo", c.augment.resize_short_lo);
    get_to(a, "resize_short_hi", c.augment.resize_short_hi);
    get_to(a, "crop_size", c.augment.crop_size);
    get_to(a, "hflip_prob", c.augment.hflip_prob);
    get_to(a, "jitter_prob", c.augment.jitter_prob);
    get_to(a, "jitter_brightness", c.augment.jitter_brightness);
    get_to(a, "jitter_contrast", c.augment.jitter_contrast);
    get_to(a, "jitter_saturation", c.augment.jitter_saturation);
    get_to(a, "jitter_hue", c.augment.jitter_hue);
    get_to(a, "grayscale_prob", c.augment.grayscale_prob);
    get_to(a, "blur_prob", c.augment.blur_prob);
    get_to(a, "blur_sigma_lo", c.augment.blur_sigma_lo);
    get_to(a, "blur_sigma_hi", c.augment.blur_sigma_hi);
    get_to(a, "interpolation", c.augment.interpolation);
  }
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    check_known_keys(e,
                     {"channels", "spatial_strides", "temporal_kernel", "spatial_kernel",
                      "projector_hidden", "projector_dim", "predictor_hidden",
                      "predictor_enabled", "input_mean", "input_std", "clip_frames",
                      "clip_stride"},
                     "encoder.");
    get_to(e, "channels", c.encoder.channels);
    get_to(e, "spatial_strides", c.encoder.spatial_strides);
    get_to(e, "temporal_kernel", c.encoder.temporal_kernel);
    get_to(e, "spatial_kernel", c.encoder.spatial_kernel);
    get_to(e, "projector_hidden", c.encoder.projector_hidden);
    get_to(e, "projector_dim", c.encoder.projector_dim);
    get_to(e, "predictor_hidden", c.encoder.predictor_hidden);
    get_to(e, "predictor_enabled", c.encoder.predictor_enabled);
    get_to(e, "input_mean", c.encoder.input_mean);
    get_to(e, "input_std", c.encoder.input_std);
    get_to(e, "clip_frames", c.encoder.clip_frames);
    get_to(e, "clip_stride", c.encoder.clip_stride);
  }
  if (j.contains("targets")) {
    c.targets.clear();
    for (const auto& t : j.at("targets")) {
      check_known_keys(t, {"name", "kind", "output_dim", "seed", "oracle_noise", "path"},
                       "targets[].");
      TargetConfig tc;
      get_to(t, "name", tc.name);
      get_to(t, "kind", tc.kind);
      get_to(t, "output_dim", tc.output_dim);
      get_to(t, "seed", tc.seed);
      get_to(t, "oracle_noise", tc.oracle_noise);
      get_to(t, "path", tc.path);
      c.targets.push_back(std::move(tc));
    }
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    check_known_keys(l, {"temporal_pool", "aux_ssl", "aux_weight", "average_targets"}, "loss.");
    get_to(l, "temporal_pool", c.loss.temporal_pool);
    get_to(l, "aux_ssl", c.loss.aux_ssl);
    get_to(l, "aux_weight", c.loss.aux_weight);
    get_to(l, "average_targets", c.loss.average_targets);
  }
  if (j.contains("optim")) {
    const auto& o = j.at("optim");
    check_known_keys(o,
                     {"base_lr_coefficient", "batch_size", "warmup_epochs", "total_epochs",
                      "weight_decay", "momentum", "trust_coefficient", "min_lr",
                      "adaptation_exclude"},
                     "optim.");
    get_to(o, "base_lr_coefficient", c.optim.base_lr_coefficient);
    get_to(o, "batch_size", c.optim.batch_size);
    get_to(o, "warmup_epochs", c.optim.warmup_epochs);
    get_to(o, "total_epochs", c.optim.total_epochs);
    get_to(o, "weight_decay", c.optim.weight_decay);
    get_to(o, "momentum", c.optim.momentum);
    get_to(o, "trust_coefficient", c.optim.trust_coefficient);
    get_to(o, "min_lr", c.optim.min_lr);
    get_to(o, "adaptation_exclude", c.optim.adaptation_exclude);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_known_keys(e,
                     {"knn_k", "knn_temperature", "clips", "crops", "bank_clips", "bank_crops",
                      "resize_short", "semi_fraction", "semi_lr", "probe", "finetune"},
                     "eval.");
    get_to(e, "knn_k", c.eval.knn_k);
    get_to(e, "knn_temperature", c.eval.knn_temperature);
    get_to(e, "clips", c.eval.clips);
    get_to(e, "crops", c.eval.crops);
    get_to(e, "bank_clips", c.eval.bank_clips);
    get_to(e, "bank_crops", c.eval.bank_crops);
    get_to(e, "resize_short", c.eval.resize_short);
    get_to(e, "semi_fraction", c.eval.semi_fraction);
    get_to(e, "semi_lr", c.eval.semi_lr);
    if (e.contains("probe")) {
      const auto& p = e.at("probe");
      check_known_keys(p, {"epochs", "warmup_epochs", "base_lr", "batch_size", "momentum"},
                       "eval.probe.");
      get_to(p, "epochs", c.eval.probe.epochs);
      get_to(p, "warmup_epochs", c.eval.probe.warmup_epochs);
      get_to(p, "base_lr", c.eval.probe.base_lr);
      get_to(p, "batch_size", c.eval.probe.batch_size);
      get_to(p, "momentum", c.eval.probe.momentum);
    }
    if (e.contains("finetune")) {
      const auto& f = e.at("finetune");
      check_known_keys(f, {"epochs", "warmup_epochs", "base_lr", "batch_size", "momentum"},
                       "eval.finetune.");
      get_to(f, "epochs", c.eval.finetune.epochs);
      get_to(f, "warmup_epochs", c.eval.finetune.warmup_epochs);
      get_to(f, "base_lr", c.eval.finetune.base_lr);
      get_to(f, "batch_size", c.eval.finetune.batch_size);
      get_to(f, "momentum", c.eval.finetune.momentum);
    }
  }
  // The loss always covers exactly the configured targets.
  c.loss.targets.clear();
  for (const auto& t : c.targets) c.loss.targets.push_back(t.name);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  json j = json::parse(in);
  return config_from_json(j);
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_config: cannot open " + path);
  out << to_json(cfg).dump(2) << "\n";
}

void apply_set_override(json& tree, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("--set expects key.path=value, got '" + assignment + "'");
  std::string path = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // bare strings are fine
  }

  json* node = &tree;
  size_t pos = 0;
  while (true) {
    size_t dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    bool leaf = dot == std::string::npos;
    if (node->is_array()) {
      size_t idx = std::stoul(key);
      if (idx >= node->size()) throw std::invalid_argument("--set: index out of range in " + path);
      node = &(*node)[idx];
    } else {
      if (!node->contains(key))
        throw std::invalid_argument("--set: unknown config key '" + path + "'");
      node = &(*node)[key];
    }
    if (leaf) break;
    pos = dot + 1;
  }
  *node = parsed;
}

}  // namespace vidistill
