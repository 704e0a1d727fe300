// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vidistill/rng.hpp"
#include "vidistill/tensor.hpp"

namespace vidistill::nn {

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  explicit Parameter(std::vector<int64_t> shape) : value(shape), grad(std::move(shape)) {}
};

/// View into a parameter for optimizers and serialization.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

/// View into a non-gradient state tensor (running statistics).
struct StateRef {
  std::string name;
  Tensor* value;
};

void he_normal_init(Tensor& w, int64_t fan_in, SeedStream& rng);

/// 3-D convolution over [B, C, T, H, W]. Temporal kernel has stride 1 and
/// replicate padding, so the temporal extent is preserved for any T >= 1 and
/// a temporally constant input responds like the collapsed 2-D kernel.
/// Spatial padding is zero, stride configurable.
class Conv3d {
public:
  Conv3d(int64_t in_channels, int64_t out_channels, int64_t temporal_kernel,
         int64_t spatial_kernel, int64_t spatial_stride);

  void init(SeedStream& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  int64_t out_spatial(int64_t in) const {
    return (in + 2 * (ks_ / 2) - ks_) / stride_ + 1;
  }

  Parameter weight;  // [Cout, Cin, kt, kh, kw]
  Parameter bias;    // [Cout]

  int64_t in_channels() const { return cin_; }
  int64_t out_channels() const { return cout_; }
  int64_t temporal_kernel() const { return kt_; }
  int64_t spatial_kernel() const { return ks_; }

private:
  Tensor im2col(const Tensor& x, int64_t b) const;

  int64_t cin_, cout_, kt_, ks_, stride_;
  Tensor cached_x_;
};

/// Batch norm over rows: x is [N, F], statistics per feature over the whole
/// process batch.
class BatchNorm1d {
public:
  explicit BatchNorm1d(int64_t features);
  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& dy);

  Parameter gamma, beta;
  Tensor running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;

private:
  Tensor cached_xhat_;
  std::vector<double> cached_istd_;
};

/// Batch norm over [B, C, T, H, W], statistics per channel over batch and all
/// spatio-temporal positions (whole-process-batch statistics).
class BatchNorm3d {
public:
  explicit BatchNorm3d(int64_t channels);
  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& dy);

  Parameter gamma, beta;
  Tensor running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;

private:
  Tensor cached_xhat_;
  std::vector<double> cached_istd_;
};

class ReLU {
public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

private:
  std::vector<uint8_t> mask_;
};

/// Fully connected layer for row batches [N, Fin] -> [N, Fout].
class Linear {
public:
  Linear(int64_t in_features, int64_t out_features);
  void init(SeedStream& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  Parameter weight;  // [Fout, Fin]
  Parameter bias;    // [Fout]

private:
  Tensor cached_x_;
};

/// Mean over H, W: [B, C, T, H, W] -> [B, T, C].
Tensor spatial_avg_pool(const Tensor& x);
Tensor spatial_avg_pool_backward(const Tensor& dy, const std::vector<int64_t>& x_shape);

/// Mean over T: [B, T, C] -> [B, C].
Tensor temporal_avg_pool_batch(const Tensor& x);
Tensor temporal_avg_pool_batch_backward(const Tensor& dy, int64_t T);

/// Row-wise L2 normalization with backward; throws on a near-zero row.
Tensor l2_normalize_rows(const Tensor& x);
Tensor l2_normalize_rows_backward(const Tensor& dy, const Tensor& x);

/// Two-layer perceptron: Linear -> BatchNorm -> ReLU -> Linear, over rows.
class Mlp {
public:
  Mlp(int64_t in_features, int64_t hidden, int64_t out_features);
  void init(SeedStream& rng);
  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& dy);

  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out);
  void collect_state(const std::string& prefix, std::vector<StateRef>& out);

  int64_t out_features() const;

  Linear fc1;
  BatchNorm1d bn;
  ReLU relu;
  Linear fc2;
};

/// Softmax cross-entropy over logits [N, K]; returns mean loss and writes
/// dlogits (already divided by N).
double softmax_cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels,
                             Tensor* dlogits);

/// Row-wise softmax.
Tensor softmax_rows(const Tensor& logits);

}  // namespace vidistill::nn
