// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vidistill/nn.hpp"
#include "vidistill/tensor.hpp"

namespace vidistill {

struct OptimConfig {
  double base_lr_coefficient = 2.4;  // linear-scaling coefficient
  int64_t batch_size = 16;
  int64_t warmup_epochs = 8;
  int64_t total_epochs = 30;
  double weight_decay = 1e-6;
  double momentum = 0.9;
  double trust_coefficient = 0.001;
  double min_lr = 0.0;
  // Which parameters skip the trust-ratio adaptation (r = 1).
  std::string adaptation_exclude = "bias_norm";

  void validate() const;
};

/// Linear scaling rule: coefficient * batch_size / 256.
double base_lr(const OptimConfig& cfg);

/// Per-step schedule: linear ramp from 0 over the warmup epochs, then cosine
/// decay to min_lr, reaching it exactly at the last step.
double lr_at(int64_t step, int64_t steps_per_epoch, const OptimConfig& cfg);

/// True for parameters the exclusion predicate matches (bias and
/// normalization parameters by default).
bool excluded_from_adaptation(const OptimConfig& cfg, const std::string& name);

/// One LARS update over the given parameter tensors. Per tensor w with grad
/// g: g' = g + wd*w; r = trust * |w| / |g'| when both norms are positive and
/// w is not excluded, else 1; u <- momentum*u + r*lr*g'; w <- w - u.
/// Momentum buffers live in `state`, keyed by parameter name, and are
/// created on first use. Non-finite gradients abort with a diagnostic.
void lars_step(std::vector<nn::ParamRef>& params, std::map<std::string, Tensor>& state,
               double lr, const OptimConfig& cfg);

/// Plain momentum SGD (the downstream-evaluation optimizer).
void sgd_step(std::vector<nn::ParamRef>& params, std::map<std::string, Tensor>& state,
              double lr, double momentum, double weight_decay = 0.0);

}  // namespace vidistill
