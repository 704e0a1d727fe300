// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vidistill/augment.hpp"
#include "vidistill/encoders.hpp"
#include "vidistill/objective.hpp"
#include "vidistill/optim.hpp"

namespace vidistill {

struct DatasetConfig {
  int64_t num_classes = 10;
  int64_t train_videos_per_class = 40;
  int64_t val_videos_per_class = 8;
  int64_t raw_frames = 64;
  int64_t spatial_size = 32;
  int64_t num_online_views = 2;  // 0 reuses v_ref as the online view
  bool anchored_ref = false;     // center v_ref instead of sampling it
  std::string path;              // optional prebuilt container
};

struct TargetConfig {
  std::string name = "projection";
  std::string kind = "random_projection";  // random_projection | oracle | feature_file
  int64_t output_dim = 32;
  uint64_t seed = 7;
  double oracle_noise = 0.1;
  std::string path;  // feature_file source
};

struct ProbeSettings {
  int64_t epochs = 30;
  int64_t warmup_epochs = 8;
  double base_lr = 1.0;
  int64_t batch_size = 64;
  double momentum = 0.9;
};

struct FinetuneSettings {
  int64_t epochs = 10;
  int64_t warmup_epochs = 2;
  double base_lr = 0.05;
  int64_t batch_size = 16;
  double momentum = 0.9;
};

struct EvalSettings {
  int64_t knn_k = 20;
  double knn_temperature = 0.07;
  int64_t clips = 1;   // test-time views (10 x 3 for the dense protocol)
  int64_t crops = 1;
  int64_t bank_clips = 1;  // center clip by default
  int64_t bank_crops = 1;
  int64_t resize_short = 36;
  double semi_fraction = 0.1;
  double semi_lr = 0.01;
  ProbeSettings probe;
  FinetuneSettings finetune;
};

/// The whole experiment: every knob is serialized, every field has a default.
struct RunConfig {
  uint64_t seed = 1234;
  std::string out_dir = "runs/default";
  int64_t checkpoint_interval_epochs = 1;
  double ema_momentum = 0.99;

  DatasetConfig dataset;
  AugConfig augment;
  EncoderConfig encoder;
  std::vector<TargetConfig> targets = {TargetConfig{}};
  LossConfig loss;  // loss.targets derived from `targets` on load
  OptimConfig optim;
  EvalSettings eval;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

/// Apply one `dotted.path=value` override to a config JSON tree. Values parse
/// as JSON when possible and fall back to strings. Unknown paths error.
void apply_set_override(nlohmann::json& tree, const std::string& assignment);

}  // namespace vidistill
