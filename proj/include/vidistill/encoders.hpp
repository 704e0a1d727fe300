// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vidistill/dataset.hpp"
#include "vidistill/nn.hpp"
#include "vidistill/tensor.hpp"

namespace vidistill {

/// Shape of the online video trunk. Temporal kernels have stride 1 so the
/// trunk emits exactly T per-frame features for a T-frame clip.
struct EncoderConfig {
  std::vector<int64_t> channels = {8, 16, 32};
  std::vector<int64_t> spatial_strides = {2, 2, 1};
  int64_t temporal_kernel = 3;
  int64_t spatial_kernel = 3;
  int64_t projector_hidden = 64;
  int64_t projector_dim = 32;
  int64_t predictor_hidden = 64;
  bool predictor_enabled = true;  // online-side asymmetry; toggleable for ablation
  double input_mean = 0.45;
  double input_std = 0.225;
  int64_t clip_frames = 8;  // T
  int64_t clip_stride = 8;  // tau

  void validate() const;
};

/// 3-D conv trunk: [B, T, H, W, 3] clips -> [B, T, C] per-frame features.
class VideoEncoder {
public:
  explicit VideoEncoder(const EncoderConfig& cfg);

  void init(SeedStream& rng);
  Tensor forward(const Tensor& clips, bool training);
  /// dfeats is [B, T, C]; parameter gradients accumulate, input grad discarded.
  void backward(const Tensor& dfeats);

  void collect_parameters(const std::string& prefix, std::vector<nn::ParamRef>& out);
  void collect_state(const std::string& prefix, std::vector<nn::StateRef>& out);

  int64_t out_dim() const { return cfg_.channels.back(); }
  const EncoderConfig& config() const { return cfg_; }
  size_t num_blocks() const { return convs_.size(); }
  nn::Conv3d& conv(size_t i) { return *convs_[i]; }

private:
  Tensor to_channel_first(const Tensor& clips) const;

  EncoderConfig cfg_;
  std::vector<std::unique_ptr<nn::Conv3d>> convs_;
  std::vector<std::unique_ptr<nn::BatchNorm3d>> bns_;
  std::vector<nn::ReLU> relus_;
  std::vector<int64_t> cached_input_shape_;
};

/// Frozen per-frame image model. Implementations are pure: repeated calls on
/// identical input are bit-identical, and nothing here ever sees a gradient.
class TargetAdapter {
public:
  virtual ~TargetAdapter() = default;
  virtual const std::string& name() const = 0;
  virtual int64_t output_dim() const = 0;
  /// clip.frames is [T, h, w, 3]; returns [T, output_dim].
  virtual Tensor encode(const Clip& clip) const = 0;
};

/// Per-frame map: fixed resize -> flatten -> frozen linear -> tanh -> frozen
/// linear. A stand-in with the right contract, not a pretrained model.
class RandomProjectionAdapter : public TargetAdapter {
public:
  RandomProjectionAdapter(std::string name, int64_t output_dim, uint64_t seed,
                          int64_t grid = 12, int64_t hidden = 64);
  const std::string& name() const override { return name_; }
  int64_t output_dim() const override { return output_dim_; }
  Tensor encode(const Clip& clip) const override;

private:
  std::string name_;
  int64_t output_dim_, grid_, hidden_;
  Tensor w1_, b1_, w2_, b2_;
};

/// Emits the class-anchored unit direction for the frame's class (recovered
/// from the generator's color signature) plus deterministic content noise
/// within a bounded angle. Test fixture, not a pretrained-model equivalent.
class OracleAdapter : public TargetAdapter {
public:
  OracleAdapter(std::string name, int64_t num_classes, int64_t output_dim, uint64_t seed,
                double noise_scale = 0.1);
  const std::string& name() const override { return name_; }
  int64_t output_dim() const override { return output_dim_; }
  Tensor encode(const Clip& clip) const override;

  /// Class recovered from the frame's dominant saturated hue; nullopt when no
  /// saturated region survives (e.g. grayscaled views).
  std::optional<int64_t> classify_frame(const Tensor& frames, int64_t t) const;
  const Tensor& anchors() const { return anchors_; }

private:
  std::string name_;
  int64_t num_classes_, output_dim_;
  double noise_scale_;
  Tensor anchors_;  // [num_classes, output_dim], orthonormal rows
};

/// Looks up externally computed per-frame features by (video id, raw frame
/// index). Lets real pretrained features plug in without bundling weights.
class FeatureFileAdapter : public TargetAdapter {
public:
  FeatureFileAdapter(std::string name, const std::string& path);
  const std::string& name() const override { return name_; }
  int64_t output_dim() const override { return output_dim_; }
  Tensor encode(const Clip& clip) const override;

  /// Writes the container: one [num_raw_frames, dim] block per video id.
  static void write_feature_file(const std::string& path,
                                 const std::vector<std::pair<std::string, Tensor>>& per_video);

private:
  std::string name_;
  int64_t output_dim_ = 0;
  std::map<std::string, Tensor> features_;  // id -> [N, D]
};

struct OnlineOutputs {
  Tensor features;                       // [B, T, C] trunk output
  Tensor projection;                     // [B, T, P]
  std::map<std::string, Tensor> predictions;  // per target: [B, T, D_tgt]
};

/// The trainable online branch: trunk + projector + one predictor head per
/// target (each target keeps its own output width). When the predictor is
/// disabled the projection itself must match the target dims.
class OnlineNetwork {
public:
  OnlineNetwork(const EncoderConfig& cfg,
                const std::vector<std::pair<std::string, int64_t>>& target_dims, uint64_t seed);

  /// clips is [B, T, H, W, 3] in [0,1].
  OnlineOutputs forward(const Tensor& clips, bool training);
  /// One backward per forward; dq per target plus optional extra gradient on
  /// the projection (the auxiliary branch feeds it).
  void backward(const std::map<std::string, Tensor>& dq,
                const Tensor* dprojection_extra = nullptr);

  void zero_grad();
  std::vector<nn::ParamRef> parameters();
  std::vector<nn::StateRef> state();

  VideoEncoder& encoder() { return encoder_; }
  nn::Mlp& projector() { return projector_; }
  int64_t projector_dim() const { return projector_.out_features(); }

  int64_t step = 0;

private:
  EncoderConfig cfg_;
  VideoEncoder encoder_;
  nn::Mlp projector_;
  std::map<std::string, std::unique_ptr<nn::Mlp>> predictors_;
  int64_t cached_b_ = 0, cached_t_ = 0;
};

/// Single-clip convenience surface: projector features [T, P] plus the
/// per-target predictions [T, D_tgt].
struct ClipEncoding {
  Tensor features;
  std::map<std::string, Tensor> predictions;
};
ClipEncoding encode_online(OnlineNetwork& net, const Clip& clip, bool training = false);

/// Frozen per-frame target features [T, output_dim]; shape-checked.
Tensor encode_target(const TargetAdapter& adapter, const Clip& clip);

/// EMA copy of the online trunk + projector. Forward-only.
class MomentumState {
public:
  MomentumState(const EncoderConfig& cfg, uint64_t seed);

  /// Copy values (parameters and running stats) from the online network.
  void copy_from(OnlineNetwork& online);
  /// theta_m <- m * theta_m + (1 - m) * theta, elementwise over parameters
  /// and running statistics alike.
  void ema_update_from(OnlineNetwork& online, double m);

  /// [B, T, H, W, 3] -> projection [B, T, P]; gradients never flow here.
  Tensor forward(const Tensor& clips, bool training);

  std::vector<nn::StateRef> tensors();

private:
  VideoEncoder encoder_;
  nn::Mlp projector_;
};

/// Elementwise EMA over paired tensors; m in [0,1].
void ema_update(std::vector<nn::StateRef>& momentum, const std::vector<nn::StateRef>& online,
                double m);

/// A 2-D conv parameter set to inflate from (e.g. an image-model trunk).
struct ImageConvWeights {
  Tensor weight;  // [Cout, Cin, kh, kw]
  Tensor bias;    // [Cout]
};

/// Mean-preserving inflation: each 2-D kernel is replicated across the
/// temporal kernel dimension and divided by the temporal extent.
void init_from_inflation(OnlineNetwork& online, const std::vector<ImageConvWeights>& image_weights);

}  // namespace vidistill
