// SPDX-License-Identifier: Apache-2.0
#include "vidistill/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace vidistill {

void OptimConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("OptimConfig: batch_size must be >= 1");
  if (warmup_epochs < 0 || total_epochs < 1 || warmup_epochs > total_epochs)
    throw std::invalid_argument("OptimConfig: need 0 <= warmup_epochs <= total_epochs");
  if (base_lr_coefficient < 0 || weight_decay < 0 || momentum < 0 || trust_coefficient < 0 ||
      min_lr < 0)
    throw std::invalid_argument("OptimConfig: rates must be >= 0");
  if (adaptation_exclude != "bias_norm" && adaptation_exclude != "none" &&
      adaptation_exclude != "all")
    throw std::invalid_argument("OptimConfig: adaptation_exclude must be bias_norm|none|all");
}

double base_lr(const OptimConfig& cfg) {
  return cfg.base_lr_coefficient * static_cast<double>(cfg.batch_size) / 256.0;
}

double lr_at(int64_t step, int64_t steps_per_epoch, const OptimConfig& cfg) {
  if (steps_per_epoch < 1) throw std::invalid_argument("lr_at: steps_per_epoch must be >= 1");
  const int64_t total_steps = cfg.total_epochs * steps_per_epoch;
  if (step < 0 || step >= total_steps)
    throw std::invalid_argument("lr_at: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(total_steps) + ")");
  const double base = base_lr(cfg);
  const int64_t warmup_steps = cfg.warmup_epochs * steps_per_epoch;
  if (step < warmup_steps)
    return base * static_cast<double>(step) / static_cast<double>(warmup_steps);
  // Cosine phase, normalized so the last step lands exactly on min_lr.
  const int64_t last = total_steps - 1;
  if (step == last) return cfg.min_lr;
  double p = static_cast<double>(step - warmup_steps) / static_cast<double>(last - warmup_steps);
  return cfg.min_lr + (base - cfg.min_lr) * 0.5 * (1.0 + std::cos(M_PI * p));
}

bool excluded_from_adaptation(const OptimConfig& cfg, const std::string& name) {
  if (cfg.adaptation_exclude == "none") return false;
  if (cfg.adaptation_exclude == "all") return true;
  auto ends_with = [&](const char* suffix) {
    std::string s(suffix);
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  return ends_with(".bias") || ends_with(".gamma") || ends_with(".beta");
}

void lars_step(std::vector<nn::ParamRef>& params, std::map<std::string, Tensor>& state,
               double lr, const OptimConfig& cfg) {
  cfg.validate();
  if (lr < 0.0) throw std::invalid_argument("lars_step: lr must be >= 0");
  for (auto& p : params) {
    Tensor& w = *p.value;
    const Tensor& g = *p.grad;
    if (!w.same_shape(g))
      throw std::invalid_argument("lars_step: grad shape mismatch at " + p.name);
    if (!g.all_finite())
      throw std::runtime_error("lars_step: non-finite gradient in '" + p.name + "'");

    Tensor g_eff = g;
    if (cfg.weight_decay != 0.0) g_eff.add_scaled(w, cfg.weight_decay);

    double r = 1.0;
    if (!excluded_from_adaptation(cfg, p.name)) {
      double wn = w.norm();
      double gn = g_eff.norm();
      if (wn > 0.0 && gn > 0.0) r = cfg.trust_coefficient * wn / gn;
    }

    auto [it, inserted] = state.try_emplace(p.name, Tensor(w.shape()));
    Tensor& u = it->second;
    if (!u.same_shape(w))
      throw std::invalid_argument("lars_step: momentum buffer shape mismatch at " + p.name);
    const double scale = r * lr;
    for (int64_t i = 0; i < u.numel(); ++i) {
      u[i] = cfg.momentum * u[i] + scale * g_eff[i];
      w[i] -= u[i];
    }
  }
}

void sgd_step(std::vector<nn::ParamRef>& params, std::map<std::string, Tensor>& state,
              double lr, double momentum, double weight_decay) {
  for (auto& p : params) {
    Tensor& w = *p.value;
    const Tensor& g = *p.grad;
    if (!g.all_finite())
      throw std::runtime_error("sgd_step: non-finite gradient in '" + p.name + "'");
    auto [it, inserted] = state.try_emplace(p.name, Tensor(w.shape()));
    Tensor& u = it->second;
    for (int64_t i = 0; i < u.numel(); ++i) {
      double gi = g[i] + weight_decay * w[i];
      u[i] = momentum * u[i] + gi;
      w[i] -= lr * u[i];
    }
  }
}

}  // namespace vidistill
