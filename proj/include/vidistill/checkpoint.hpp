// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "vidistill/tensor.hpp"

namespace vidistill {

/// Versioned binary training snapshot: the full resolved config, the step
/// counter, online parameters and normalization statistics, the EMA branch
/// when enabled, and the optimizer momentum buffers. Restoring one must
/// reproduce the next training step bit-exactly (single-worker loading).
struct Checkpoint {
  nlohmann::json config;
  int64_t step = 0;
  std::map<std::string, Tensor> online;     // parameters + running stats
  std::map<std::string, Tensor> momentum;   // EMA branch, empty when disabled
  std::map<std::string, Tensor> optimizer;  // per-parameter momentum buffers
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vidistill
