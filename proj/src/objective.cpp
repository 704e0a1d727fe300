// SPDX-License-Identifier: Apache-2.0
#include "vidistill/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace vidistill {

void LossConfig::validate() const {
  if (targets.empty()) throw std::invalid_argument("LossConfig: targets must be non-empty");
  if (aux_weight < 0.0) throw std::invalid_argument("LossConfig: aux_weight must be >= 0");
  if (aux_weight > 0.0 && !aux_ssl)
    throw std::invalid_argument("LossConfig: aux_weight > 0 requires aux_ssl");
}

double cosine_distance(const double* q, const double* k, int64_t d) {
  double qq = 0.0, kk = 0.0, qk = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    qq += q[i] * q[i];
    kk += k[i] * k[i];
    qk += q[i] * k[i];
  }
  double qn = std::sqrt(qq), kn = std::sqrt(kk);
  if (qn == 0.0 || kn == 0.0)
    throw std::domain_error("cosine_distance: zero-norm input (collapsed or dead feature)");
  return 2.0 - 2.0 * qk / (qn * kn);
}

double cosine_distance(const Tensor& q, const Tensor& k) {
  if (!q.same_shape(k)) throw std::invalid_argument("cosine_distance: shape mismatch");
  return cosine_distance(q.data(), k.data(), q.numel());
}

void cosine_distance_grad_q(const double* q, const double* k, int64_t d, double scale,
                            double* dq_accum) {
  double qq = 0.0, kk = 0.0, qk = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    qq += q[i] * q[i];
    kk += k[i] * k[i];
    qk += q[i] * k[i];
  }
  double qn = std::sqrt(qq), kn = std::sqrt(kk);
  if (qn == 0.0 || kn == 0.0)
    throw std::domain_error("cosine_distance: zero-norm input (collapsed or dead feature)");
  // d/dq [2 - 2 q.k / (|q||k|)] = -2 (k / (|q||k|) - (q.k) q / (|q|^3 |k|))
  double inv = 1.0 / (qn * kn);
  double proj = qk / (qq * qn * kn);
  for (int64_t i = 0; i < d; ++i) dq_accum[i] += scale * (-2.0) * (k[i] * inv - q[i] * proj);
}

Tensor temporal_pool(const Tensor& features) {
  if (features.ndim() != 2) throw std::invalid_argument("temporal_pool: expected [T, D]");
  const int64_t T = features.dim(0), D = features.dim(1);
  if (T < 1) throw std::invalid_argument("temporal_pool: T must be >= 1");
  Tensor out({D});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t d = 0; d < D; ++d) out[d] += features.at2(t, d) / static_cast<double>(T);
  return out;
}

LossResult prediction_loss(const std::vector<Tensor>& q_views, const Tensor& k_ref,
                           bool pool) {
  if (q_views.empty()) throw std::invalid_argument("prediction_loss: no online views");
  if (k_ref.ndim() != 2) throw std::invalid_argument("prediction_loss: k_ref must be [T, D]");
  const int64_t T = k_ref.dim(0), D = k_ref.dim(1);
  for (const auto& q : q_views)
    if (!q.same_shape(k_ref))
      throw std::invalid_argument("prediction_loss: prediction shape " + shape_string(q.shape()) +
                                  " does not match target " + shape_string(k_ref.shape()));
  const double view_w = 1.0 / static_cast<double>(q_views.size());

  LossResult res;
  res.grad_q.reserve(q_views.size());
  if (pool) {
    Tensor k_pooled = temporal_pool(k_ref);
    for (const auto& q : q_views) {
      Tensor q_pooled = temporal_pool(q);
      res.value += view_w * cosine_distance(q_pooled.data(), k_pooled.data(), D);
      Tensor dq_pooled({D});
      cosine_distance_grad_q(q_pooled.data(), k_pooled.data(), D, view_w, dq_pooled.data());
      Tensor dq({T, D});
      for (int64_t t = 0; t < T; ++t)
        for (int64_t d = 0; d < D; ++d) dq.at2(t, d) = dq_pooled[d] / static_cast<double>(T);
      res.grad_q.push_back(std::move(dq));
    }
  } else {
    const double frame_w = view_w / static_cast<double>(T);
    for (const auto& q : q_views) {
      Tensor dq({T, D});
      for (int64_t t = 0; t < T; ++t) {
        const double* qt = q.data() + t * D;
        const double* kt = k_ref.data() + t * D;
        res.value += frame_w * cosine_distance(qt, kt, D);
        cosine_distance_grad_q(qt, kt, D, frame_w, dq.data() + t * D);
      }
      res.grad_q.push_back(std::move(dq));
    }
  }
  return res;
}

EnsembleResult ensemble_loss(const std::map<std::string, std::vector<Tensor>>& q_sets,
                             const std::map<std::string, Tensor>& k_set, const LossConfig& cfg) {
  cfg.validate();
  if (q_sets.size() != cfg.targets.size() || k_set.size() != cfg.targets.size())
    throw std::invalid_argument("ensemble_loss: target list mismatch");
  for (const auto& name : cfg.targets)
    if (!q_sets.count(name) || !k_set.count(name))
      throw std::invalid_argument("ensemble_loss: missing target '" + name + "'");

  const double target_w = cfg.average_targets ? 1.0 / static_cast<double>(cfg.targets.size()) : 1.0;
  EnsembleResult res;
  for (const auto& name : cfg.targets) {
    LossResult term = prediction_loss(q_sets.at(name), k_set.at(name), cfg.temporal_pool);
    res.per_target[name] = term.value;
    res.value += target_w * term.value;
    if (target_w != 1.0)
      for (auto& g : term.grad_q)
        for (int64_t i = 0; i < g.numel(); ++i) g[i] *= target_w;
    res.grad_q[name] = std::move(term.grad_q);
  }
  return res;
}

LossResult aux_ssl_loss(const std::vector<Tensor>& q_views, const Tensor& k_momentum,
                        const LossConfig& cfg) {
  if (!cfg.aux_ssl)
    throw std::invalid_argument("aux_ssl_loss: called with aux_ssl disabled");
  return prediction_loss(q_views, k_momentum, cfg.temporal_pool);
}

}  // namespace vidistill
