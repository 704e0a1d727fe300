// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vidistill/tensor.hpp"

namespace vidistill {

/// Loss-side ablation switches.
struct LossConfig {
  bool temporal_pool = true;
  std::vector<std::string> targets;  // active target adapter names
  bool aux_ssl = false;
  double aux_weight = 0.0;
  bool average_targets = false;  // default: sum over targets

  void validate() const;
};

/// 2 - 2 * cos(q, k), in [0, 4]. Zero-norm inputs are a hard error: they
/// signal a collapsed or dead feature, never something to normalize away.
double cosine_distance(const Tensor& q, const Tensor& k);
double cosine_distance(const double* q, const double* k, int64_t d);

/// d(cosine_distance)/dq; k never receives a gradient (stop-gradient is
/// structural: no k-gradient path exists in this module).
void cosine_distance_grad_q(const double* q, const double* k, int64_t d, double scale,
                            double* dq_accum);

/// Arithmetic mean over the leading (time) axis: [T, D] -> [D].
Tensor temporal_pool(const Tensor& features);

/// Value plus analytic gradients w.r.t. each online view's predictions.
struct LossResult {
  double value = 0.0;
  std::vector<Tensor> grad_q;  // one [T, D] per view
};

/// Mean over online views of the cosine distance between prediction and
/// target feature: pooled over time when cfg says so, frame-index matched
/// otherwise. k_ref is stop-gradient.
LossResult prediction_loss(const std::vector<Tensor>& q_views, const Tensor& k_ref,
                           bool temporal_pool);

/// Multi-target extension: the per-target losses combined over every active
/// target (sum by default, mean when cfg.average_targets).
struct EnsembleResult {
  double value = 0.0;
  std::map<std::string, double> per_target;
  std::map<std::string, std::vector<Tensor>> grad_q;
};
EnsembleResult ensemble_loss(const std::map<std::string, std::vector<Tensor>>& q_sets,
                             const std::map<std::string, Tensor>& k_set, const LossConfig& cfg);

/// Same functional form against the EMA branch's reference features. The
/// total objective is prediction loss + aux_weight * aux loss.
LossResult aux_ssl_loss(const std::vector<Tensor>& q_views, const Tensor& k_momentum,
                        const LossConfig& cfg);

}  // namespace vidistill
