// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vidistill/checkpoint.hpp"
#include "vidistill/config.hpp"
#include "vidistill/eval.hpp"

namespace vidistill {

struct PretrainResult {
  std::string checkpoint_path;
  std::string metrics_path;
  double final_loss = 0.0;
  int64_t steps = 0;
};

/// Generate (or load) the corpus and assign splits: per class, the first
/// train_videos_per_class are train, the rest val.
std::vector<VideoRecord> build_dataset(const RunConfig& cfg);

std::vector<std::unique_ptr<TargetAdapter>> build_targets(const RunConfig& cfg);

std::unique_ptr<OnlineNetwork> build_network(const RunConfig& cfg);

EvalGeometry eval_geometry(const RunConfig& cfg);

/// Restore network (and optionally EMA/optimizer state) from a checkpoint.
void restore_network(OnlineNetwork& net, const std::map<std::string, Tensor>& tensors);

/// The full pretraining loop. Resuming from a checkpoint reproduces the
/// uninterrupted run bit-exactly (single-worker loading).
PretrainResult run_pretrain(const RunConfig& cfg, const std::string& resume_checkpoint = "");

/// Dispatch one evaluation protocol against a checkpoint and append the
/// report to the run's metrics log.
EvalReport run_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                    const std::string& protocol);

/// Reserved prediction-head name for the auxiliary EMA-branch loss.
inline constexpr const char* kAuxHeadName = "aux_ssl";

}  // namespace vidistill
