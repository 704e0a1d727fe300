// SPDX-License-Identifier: Apache-2.0
#include "vidistill/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace vidistill::nn {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

void he_normal_init(Tensor& w, int64_t fan_in, SeedStream& rng) {
  double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, stddev);
}

// ---------------------------------------------------------------- Conv3d

Conv3d::Conv3d(int64_t in_channels, int64_t out_channels, int64_t temporal_kernel,
               int64_t spatial_kernel, int64_t spatial_stride)
    : weight({out_channels, in_channels, temporal_kernel, spatial_kernel, spatial_kernel}),
      bias({out_channels}),
      cin_(in_channels),
      cout_(out_channels),
      kt_(temporal_kernel),
      ks_(spatial_kernel),
      stride_(spatial_stride) {
  if (temporal_kernel % 2 == 0 || spatial_kernel % 2 == 0)
    throw std::invalid_argument("Conv3d: kernels must be odd");
}

void Conv3d::init(SeedStream& rng) {
  he_normal_init(weight.value, cin_ * kt_ * ks_ * ks_, rng);
  bias.value.fill(0.0);
}

// Column matrix for one batch element: [Cin*kt*ks*ks, T*Ho*Wo].
Tensor Conv3d::im2col(const Tensor& x, int64_t b) const {
  const int64_t T = x.dim(2), H = x.dim(3), W = x.dim(4);
  const int64_t Ho = out_spatial(H), Wo = out_spatial(W);
  const int64_t pt = kt_ / 2, ps = ks_ / 2;
  const int64_t rows = cin_ * kt_ * ks_ * ks_;
  const int64_t cols = T * Ho * Wo;
  Tensor col({rows, cols});
  for (int64_t ci = 0; ci < cin_; ++ci)
    for (int64_t dt = 0; dt < kt_; ++dt)
      for (int64_t dy = 0; dy < ks_; ++dy)
        for (int64_t dx = 0; dx < ks_; ++dx) {
          int64_t row = ((ci * kt_ + dt) * ks_ + dy) * ks_ + dx;
          double* dst = col.data() + row * cols;
          for (int64_t t = 0; t < T; ++t) {
            // Replicate padding in time: clamp the source index.
            int64_t ts = std::clamp<int64_t>(t + dt - pt, 0, T - 1);
            for (int64_t y = 0; y < Ho; ++y) {
              int64_t ys = y * stride_ + dy - ps;
              for (int64_t x_ = 0; x_ < Wo; ++x_) {
                int64_t xs = x_ * stride_ + dx - ps;
                double v = 0.0;
                if (ys >= 0 && ys < H && xs >= 0 && xs < W) v = x.at5(b, ci, ts, ys, xs);
                dst[(t * Ho + y) * Wo + x_] = v;
              }
            }
          }
        }
  return col;
}

Tensor Conv3d::forward(const Tensor& x) {
  if (x.ndim() != 5 || x.dim(1) != cin_)
    throw std::invalid_argument("Conv3d: expected [B," + std::to_string(cin_) + ",T,H,W], got " +
                                shape_string(x.shape()));
  cached_x_ = x;
  const int64_t B = x.dim(0), T = x.dim(2);
  const int64_t Ho = out_spatial(x.dim(3)), Wo = out_spatial(x.dim(4));
  const int64_t rows = cin_ * kt_ * ks_ * ks_;
  const int64_t cols = T * Ho * Wo;

  Tensor y({B, cout_, T, Ho, Wo});
  ConstMapRM Wm(weight.value.data(), cout_, rows);
  for (int64_t b = 0; b < B; ++b) {
    Tensor col = im2col(x, b);
    ConstMapRM Cm(col.data(), rows, cols);
    MapRM Ym(y.data() + b * cout_ * cols, cout_, cols);
    Ym.noalias() = Wm * Cm;
    for (int64_t co = 0; co < cout_; ++co) Ym.row(co).array() += bias.value[co];
  }
  return y;
}

Tensor Conv3d::backward(const Tensor& dy) {
  const Tensor& x = cached_x_;
  if (x.empty()) throw std::runtime_error("Conv3d: backward before forward");
  const int64_t B = x.dim(0), T = x.dim(2), H = x.dim(3), W = x.dim(4);
  const int64_t Ho = out_spatial(H), Wo = out_spatial(W);
  const int64_t pt = kt_ / 2, ps = ks_ / 2;
  const int64_t rows = cin_ * kt_ * ks_ * ks_;
  const int64_t cols = T * Ho * Wo;

  Tensor dx({B, cin_, T, H, W});
  MapRM dWm(weight.grad.data(), cout_, rows);
  ConstMapRM Wm(weight.value.data(), cout_, rows);
  Tensor dcol({rows, cols});
  for (int64_t b = 0; b < B; ++b) {
    Tensor col = im2col(x, b);
    ConstMapRM Cm(col.data(), rows, cols);
    ConstMapRM dYm(dy.data() + b * cout_ * cols, cout_, cols);
    dWm.noalias() += dYm * Cm.transpose();
    for (int64_t co = 0; co < cout_; ++co) bias.grad[co] += dYm.row(co).sum();

    MapRM dCm(dcol.data(), rows, cols);
    dCm.noalias() = Wm.transpose() * dYm;
    // col2im: scatter-add through the same index map (clamped temporal
    // indices accumulate, the adjoint of replicate padding).
    for (int64_t ci = 0; ci < cin_; ++ci)
      for (int64_t dt = 0; dt < kt_; ++dt)
        for (int64_t dyk = 0; dyk < ks_; ++dyk)
          for (int64_t dxk = 0; dxk < ks_; ++dxk) {
            int64_t row = ((ci * kt_ + dt) * ks_ + dyk) * ks_ + dxk;
            const double* src = dcol.data() + row * cols;
            for (int64_t t = 0; t < T; ++t) {
              int64_t ts = std::clamp<int64_t>(t + dt - pt, 0, T - 1);
              for (int64_t y = 0; y < Ho; ++y) {
                int64_t ys = y * stride_ + dyk - ps;
                if (ys < 0 || ys >= H) continue;
                for (int64_t x_ = 0; x_ < Wo; ++x_) {
                  int64_t xs = x_ * stride_ + dxk - ps;
                  if (xs < 0 || xs >= W) continue;
                  dx.at5(b, ci, ts, ys, xs) += src[(t * Ho + y) * Wo + x_];
                }
              }
            }
          }
  }
  return dx;
}

// ---------------------------------------------------------------- BatchNorm

namespace {

// Shared batch-norm math over a "row view" where channel c and reduction
// size M are abstracted by the caller's indexing.
struct BnCache {
  Tensor xhat;
  std::vector<double> istd;
};

}  // namespace

BatchNorm1d::BatchNorm1d(int64_t features)
    : gamma({features}), beta({features}), running_mean({features}), running_var({features}) {
  gamma.value.fill(1.0);
  running_var.fill(1.0);
}

Tensor BatchNorm1d::forward(const Tensor& x, bool training) {
  const int64_t N = x.dim(0), F = x.dim(1);
  Tensor y({N, F});
  cached_xhat_ = Tensor({N, F});
  cached_istd_.assign(static_cast<size_t>(F), 0.0);
  for (int64_t f = 0; f < F; ++f) {
    double mean, var;
    if (training) {
      mean = 0.0;
      for (int64_t n = 0; n < N; ++n) mean += x.at2(n, f);
      mean /= N;
      var = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        double d = x.at2(n, f) - mean;
        var += d * d;
      }
      var /= N;
      running_mean[f] = (1.0 - momentum) * running_mean[f] + momentum * mean;
      running_var[f] = (1.0 - momentum) * running_var[f] + momentum * var;
    } else {
      mean = running_mean[f];
      var = running_var[f];
    }
    double istd = 1.0 / std::sqrt(var + eps);
    cached_istd_[static_cast<size_t>(f)] = istd;
    for (int64_t n = 0; n < N; ++n) {
      double xh = (x.at2(n, f) - mean) * istd;
      cached_xhat_.at2(n, f) = xh;
      y.at2(n, f) = gamma.value[f] * xh + beta.value[f];
    }
  }
  return y;
}

Tensor BatchNorm1d::backward(const Tensor& dy) {
  const int64_t N = dy.dim(0), F = dy.dim(1);
  Tensor dx({N, F});
  for (int64_t f = 0; f < F; ++f) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int64_t n = 0; n < N; ++n) {
      sum_dy += dy.at2(n, f);
      sum_dy_xhat += dy.at2(n, f) * cached_xhat_.at2(n, f);
    }
    gamma.grad[f] += sum_dy_xhat;
    beta.grad[f] += sum_dy;
    double g = gamma.value[f] * cached_istd_[static_cast<size_t>(f)];
    for (int64_t n = 0; n < N; ++n) {
      dx.at2(n, f) = g * (dy.at2(n, f) - sum_dy / N - cached_xhat_.at2(n, f) * sum_dy_xhat / N);
    }
  }
  return dx;
}

BatchNorm3d::BatchNorm3d(int64_t channels)
    : gamma({channels}), beta({channels}), running_mean({channels}), running_var({channels}) {
  gamma.value.fill(1.0);
  running_var.fill(1.0);
}

Tensor BatchNorm3d::forward(const Tensor& x, bool training) {
  const int64_t B = x.dim(0), C = x.dim(1);
  const int64_t M = x.dim(2) * x.dim(3) * x.dim(4);
  Tensor y(x.shape());
  cached_xhat_ = Tensor(x.shape());
  cached_istd_.assign(static_cast<size_t>(C), 0.0);
  for (int64_t c = 0; c < C; ++c) {
    double mean, var;
    const int64_t count = B * M;
    if (training) {
      mean = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const double* p = x.data() + (b * C + c) * M;
        for (int64_t i = 0; i < M; ++i) mean += p[i];
      }
      mean /= count;
      var = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const double* p = x.data() + (b * C + c) * M;
        for (int64_t i = 0; i < M; ++i) {
          double d = p[i] - mean;
          var += d * d;
        }
      }
      var /= count;
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean;
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    double istd = 1.0 / std::sqrt(var + eps);
    cached_istd_[static_cast<size_t>(c)] = istd;
    for (int64_t b = 0; b < B; ++b) {
      const double* p = x.data() + (b * C + c) * M;
      double* xh = cached_xhat_.data() + (b * C + c) * M;
      double* yp = y.data() + (b * C + c) * M;
      for (int64_t i = 0; i < M; ++i) {
        xh[i] = (p[i] - mean) * istd;
        yp[i] = gamma.value[c] * xh[i] + beta.value[c];
      }
    }
  }
  return y;
}

Tensor BatchNorm3d::backward(const Tensor& dy) {
  const int64_t B = dy.dim(0), C = dy.dim(1);
  const int64_t M = dy.dim(2) * dy.dim(3) * dy.dim(4);
  const int64_t count = B * M;
  Tensor dx(dy.shape());
  for (int64_t c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int64_t b = 0; b < B; ++b) {
      const double* dyp = dy.data() + (b * C + c) * M;
      const double* xh = cached_xhat_.data() + (b * C + c) * M;
      for (int64_t i = 0; i < M; ++i) {
        sum_dy += dyp[i];
        sum_dy_xhat += dyp[i] * xh[i];
      }
    }
    gamma.grad[c] += sum_dy_xhat;
    beta.grad[c] += sum_dy;
    double g = gamma.value[c] * cached_istd_[static_cast<size_t>(c)];
    for (int64_t b = 0; b < B; ++b) {
      const double* dyp = dy.data() + (b * C + c) * M;
      const double* xh = cached_xhat_.data() + (b * C + c) * M;
      double* dxp = dx.data() + (b * C + c) * M;
      for (int64_t i = 0; i < M; ++i)
        dxp[i] = g * (dyp[i] - sum_dy / count - xh[i] * sum_dy_xhat / count);
    }
  }
  return dx;
}

// ---------------------------------------------------------------- ReLU / Linear

Tensor ReLU::forward(const Tensor& x) {
  Tensor y = x;
  mask_.assign(static_cast<size_t>(x.numel()), 0);
  for (int64_t i = 0; i < y.numel(); ++i) {
    if (y[i] > 0.0) {
      mask_[static_cast<size_t>(i)] = 1;
    } else {
      y[i] = 0.0;
    }
  }
  return y;
}

Tensor ReLU::backward(const Tensor& dy) const {
  Tensor dx = dy;
  for (int64_t i = 0; i < dx.numel(); ++i)
    if (!mask_[static_cast<size_t>(i)]) dx[i] = 0.0;
  return dx;
}

Linear::Linear(int64_t in_features, int64_t out_features)
    : weight({out_features, in_features}), bias({out_features}) {}

void Linear::init(SeedStream& rng) {
  he_normal_init(weight.value, weight.value.dim(1), rng);
  bias.value.fill(0.0);
}

Tensor Linear::forward(const Tensor& x) {
  if (x.ndim() != 2 || x.dim(1) != weight.value.dim(1))
    throw std::invalid_argument("Linear: expected [N," + std::to_string(weight.value.dim(1)) +
                                "], got " + shape_string(x.shape()));
  cached_x_ = x;
  const int64_t N = x.dim(0), F = x.dim(1), G = weight.value.dim(0);
  Tensor y({N, G});
  ConstMapRM Xm(x.data(), N, F);
  ConstMapRM Wm(weight.value.data(), G, F);
  MapRM Ym(y.data(), N, G);
  Ym.noalias() = Xm * Wm.transpose();
  for (int64_t g = 0; g < G; ++g) Ym.col(g).array() += bias.value[g];
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const Tensor& x = cached_x_;
  const int64_t N = x.dim(0), F = x.dim(1), G = weight.value.dim(0);
  ConstMapRM Xm(x.data(), N, F);
  ConstMapRM dYm(dy.data(), N, G);
  MapRM dWm(weight.grad.data(), G, F);
  dWm.noalias() += dYm.transpose() * Xm;
  for (int64_t g = 0; g < G; ++g) bias.grad[g] += dYm.col(g).sum();
  Tensor dx({N, F});
  MapRM dXm(dx.data(), N, F);
  ConstMapRM Wm(weight.value.data(), G, F);
  dXm.noalias() = dYm * Wm;
  return dx;
}

// ---------------------------------------------------------------- pooling

Tensor spatial_avg_pool(const Tensor& x) {
  const int64_t B = x.dim(0), C = x.dim(1), T = x.dim(2);
  const int64_t HW = x.dim(3) * x.dim(4);
  Tensor y({B, T, C});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t t = 0; t < T; ++t) {
        const double* p = x.data() + ((b * C + c) * T + t) * HW;
        double s = 0.0;
        for (int64_t i = 0; i < HW; ++i) s += p[i];
        y.at3(b, t, c) = s / static_cast<double>(HW);
      }
  return y;
}

Tensor spatial_avg_pool_backward(const Tensor& dy, const std::vector<int64_t>& x_shape) {
  const int64_t B = x_shape[0], C = x_shape[1], T = x_shape[2];
  const int64_t HW = x_shape[3] * x_shape[4];
  Tensor dx(x_shape);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t t = 0; t < T; ++t) {
        double g = dy.at3(b, t, c) / static_cast<double>(HW);
        double* p = dx.data() + ((b * C + c) * T + t) * HW;
        for (int64_t i = 0; i < HW; ++i) p[i] = g;
      }
  return dx;
}

Tensor temporal_avg_pool_batch(const Tensor& x) {
  const int64_t B = x.dim(0), T = x.dim(1), C = x.dim(2);
  Tensor y({B, C});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t t = 0; t < T; ++t)
      for (int64_t c = 0; c < C; ++c) y.at2(b, c) += x.at3(b, t, c) / static_cast<double>(T);
  return y;
}

Tensor temporal_avg_pool_batch_backward(const Tensor& dy, int64_t T) {
  const int64_t B = dy.dim(0), C = dy.dim(1);
  Tensor dx({B, T, C});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t t = 0; t < T; ++t)
      for (int64_t c = 0; c < C; ++c) dx.at3(b, t, c) = dy.at2(b, c) / static_cast<double>(T);
  return dx;
}

Tensor l2_normalize_rows(const Tensor& x) {
  const int64_t N = x.dim(0), D = x.dim(1);
  Tensor y({N, D});
  for (int64_t n = 0; n < N; ++n) {
    double s = 0.0;
    for (int64_t d = 0; d < D; ++d) s += x.at2(n, d) * x.at2(n, d);
    double norm = std::sqrt(s);
    if (norm < 1e-12) throw std::domain_error("l2_normalize_rows: near-zero row norm");
    for (int64_t d = 0; d < D; ++d) y.at2(n, d) = x.at2(n, d) / norm;
  }
  return y;
}

Tensor l2_normalize_rows_backward(const Tensor& dy, const Tensor& x) {
  const int64_t N = x.dim(0), D = x.dim(1);
  Tensor dx({N, D});
  for (int64_t n = 0; n < N; ++n) {
    double s = 0.0, dot = 0.0;
    for (int64_t d = 0; d < D; ++d) s += x.at2(n, d) * x.at2(n, d);
    double norm = std::sqrt(s);
    for (int64_t d = 0; d < D; ++d) dot += dy.at2(n, d) * x.at2(n, d) / norm;
    for (int64_t d = 0; d < D; ++d)
      dx.at2(n, d) = (dy.at2(n, d) - (x.at2(n, d) / norm) * dot) / norm;
  }
  return dx;
}

// ---------------------------------------------------------------- Mlp

Mlp::Mlp(int64_t in_features, int64_t hidden, int64_t out_features)
    : fc1(in_features, hidden), bn(hidden), fc2(hidden, out_features) {}

void Mlp::init(SeedStream& rng) {
  fc1.init(rng);
  fc2.init(rng);
}

Tensor Mlp::forward(const Tensor& x, bool training) {
  return fc2.forward(relu.forward(bn.forward(fc1.forward(x), training)));
}

Tensor Mlp::backward(const Tensor& dy) {
  return fc1.backward(bn.backward(relu.backward(fc2.backward(dy))));
}

int64_t Mlp::out_features() const { return fc2.weight.value.dim(0); }

void Mlp::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".fc1.weight", &fc1.weight.value, &fc1.weight.grad});
  out.push_back({prefix + ".fc1.bias", &fc1.bias.value, &fc1.bias.grad});
  out.push_back({prefix + ".bn.gamma", &bn.gamma.value, &bn.gamma.grad});
  out.push_back({prefix + ".bn.beta", &bn.beta.value, &bn.beta.grad});
  out.push_back({prefix + ".fc2.weight", &fc2.weight.value, &fc2.weight.grad});
  out.push_back({prefix + ".fc2.bias", &fc2.bias.value, &fc2.bias.grad});
}

void Mlp::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  out.push_back({prefix + ".bn.running_mean", &bn.running_mean});
  out.push_back({prefix + ".bn.running_var", &bn.running_var});
}

// ---------------------------------------------------------------- losses

Tensor softmax_rows(const Tensor& logits) {
  const int64_t N = logits.dim(0), K = logits.dim(1);
  Tensor p({N, K});
  for (int64_t n = 0; n < N; ++n) {
    double mx = logits.at2(n, 0);
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, logits.at2(n, k));
    double z = 0.0;
    for (int64_t k = 0; k < K; ++k) {
      double e = std::exp(logits.at2(n, k) - mx);
      p.at2(n, k) = e;
      z += e;
    }
    for (int64_t k = 0; k < K; ++k) p.at2(n, k) /= z;
  }
  return p;
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels,
                             Tensor* dlogits) {
  const int64_t N = logits.dim(0), K = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != N)
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  Tensor p = softmax_rows(logits);
  double loss = 0.0;
  for (int64_t n = 0; n < N; ++n)
    loss -= std::log(std::max(p.at2(n, labels[static_cast<size_t>(n)]), 1e-300));
  loss /= N;
  if (dlogits) {
    *dlogits = p;
    for (int64_t n = 0; n < N; ++n) {
      dlogits->at2(n, labels[static_cast<size_t>(n)]) -= 1.0;
      for (int64_t k = 0; k < K; ++k) dlogits->at2(n, k) /= static_cast<double>(N);
    }
  }
  return loss;
}

}  // namespace vidistill::nn
