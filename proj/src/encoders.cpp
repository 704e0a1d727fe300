// SPDX-License-Identifier: Apache-2.0
#include "vidistill/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "vidistill/augment.hpp"
#include "vidistill/color.hpp"

namespace vidistill {

void EncoderConfig::validate() const {
  if (channels.empty()) throw std::invalid_argument("EncoderConfig: channels must be non-empty");
  if (spatial_strides.size() != channels.size())
    throw std::invalid_argument("EncoderConfig: one spatial stride per block required");
  if (temporal_kernel < 1 || temporal_kernel % 2 == 0 || spatial_kernel < 1 ||
      spatial_kernel % 2 == 0)
    throw std::invalid_argument("EncoderConfig: kernels must be odd and >= 1");
  if (projector_hidden < 1 || projector_dim < 1 || predictor_hidden < 1)
    throw std::invalid_argument("EncoderConfig: head widths must be >= 1");
  if (clip_frames < 1 || clip_stride < 1)
    throw std::invalid_argument("EncoderConfig: clip_frames and clip_stride must be >= 1");
  if (input_std <= 0.0) throw std::invalid_argument("EncoderConfig: input_std must be > 0");
}

// ---------------------------------------------------------------- VideoEncoder

VideoEncoder::VideoEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int64_t in = 3;
  for (size_t i = 0; i < cfg_.channels.size(); ++i) {
    convs_.push_back(std::make_unique<nn::Conv3d>(in, cfg_.channels[i], cfg_.temporal_kernel,
                                                  cfg_.spatial_kernel, cfg_.spatial_strides[i]));
    bns_.push_back(std::make_unique<nn::BatchNorm3d>(cfg_.channels[i]));
    relus_.emplace_back();
    in = cfg_.channels[i];
  }
}

void VideoEncoder::init(SeedStream& rng) {
  for (auto& c : convs_) c->init(rng);
}

Tensor VideoEncoder::to_channel_first(const Tensor& clips) const {
  const int64_t B = clips.dim(0), T = clips.dim(1), H = clips.dim(2), W = clips.dim(3);
  Tensor x({B, 3, T, H, W});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t t = 0; t < T; ++t)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t xx = 0; xx < W; ++xx)
          for (int64_t c = 0; c < 3; ++c)
            x.at5(b, c, t, y, xx) =
                (clips.at5(b, t, y, xx, c) - cfg_.input_mean) / cfg_.input_std;
  return x;
}

Tensor VideoEncoder::forward(const Tensor& clips, bool training) {
  if (clips.ndim() != 5 || clips.dim(4) != 3)
    throw std::invalid_argument("VideoEncoder: expected [B,T,H,W,3], got " +
                                shape_string(clips.shape()));
  Tensor x = to_channel_first(clips);
  for (size_t i = 0; i < convs_.size(); ++i) {
    x = convs_[i]->forward(x);
    x = bns_[i]->forward(x, training);
    x = relus_[i].forward(x);
  }
  cached_input_shape_ = x.shape();  // last pre-pool activation shape
  return nn::spatial_avg_pool(x);
}

void VideoEncoder::backward(const Tensor& dfeats) {
  if (cached_input_shape_.empty())
    throw std::runtime_error("VideoEncoder: backward before forward");
  Tensor dx = nn::spatial_avg_pool_backward(dfeats, cached_input_shape_);
  for (size_t i = convs_.size(); i-- > 0;) {
    dx = relus_[i].backward(dx);
    dx = bns_[i]->backward(dx);
    dx = convs_[i]->backward(dx);
  }
}

void VideoEncoder::collect_parameters(const std::string& prefix, std::vector<nn::ParamRef>& out) {
  for (size_t i = 0; i < convs_.size(); ++i) {
    std::string base = prefix + ".block" + std::to_string(i);
    out.push_back({base + ".conv.weight", &convs_[i]->weight.value, &convs_[i]->weight.grad});
    out.push_back({base + ".conv.bias", &convs_[i]->bias.value, &convs_[i]->bias.grad});
    out.push_back({base + ".bn.gamma", &bns_[i]->gamma.value, &bns_[i]->gamma.grad});
    out.push_back({base + ".bn.beta", &bns_[i]->beta.value, &bns_[i]->beta.grad});
  }
}

void VideoEncoder::collect_state(const std::string& prefix, std::vector<nn::StateRef>& out) {
  for (size_t i = 0; i < bns_.size(); ++i) {
    std::string base = prefix + ".block" + std::to_string(i);
    out.push_back({base + ".bn.running_mean", &bns_[i]->running_mean});
    out.push_back({base + ".bn.running_var", &bns_[i]->running_var});
  }
}

// ---------------------------------------------------------------- adapters

RandomProjectionAdapter::RandomProjectionAdapter(std::string name, int64_t output_dim,
                                                 uint64_t seed, int64_t grid, int64_t hidden)
    : name_(std::move(name)),
      output_dim_(output_dim),
      grid_(grid),
      hidden_(hidden),
      w1_({hidden, grid * grid * 3}),
      b1_({hidden}),
      w2_({output_dim, hidden}),
      b2_({output_dim}) {
  if (output_dim < 1 || grid < 1 || hidden < 1)
    throw std::invalid_argument("RandomProjectionAdapter: dims must be >= 1");
  SeedStream rng = SeedStream::from_key({seed, 0x72706164ull});
  nn::he_normal_init(w1_, grid * grid * 3, rng);
  nn::he_normal_init(w2_, hidden, rng);
  for (int64_t i = 0; i < b1_.numel(); ++i) b1_[i] = rng.normal(0.0, 0.1);
  for (int64_t i = 0; i < b2_.numel(); ++i) b2_[i] = rng.normal(0.0, 0.1);
}

Tensor RandomProjectionAdapter::encode(const Clip& clip) const {
  const int64_t T = clip.t();
  const int64_t h = clip.frames.dim(1), w = clip.frames.dim(2);
  const int64_t in_dim = grid_ * grid_ * 3;
  Tensor out({T, output_dim_});
  const int64_t frame_elems = h * w * 3;
  for (int64_t t = 0; t < T; ++t) {
    Tensor frame({h, w, 3},
                 std::vector<double>(clip.frames.data() + t * frame_elems,
                                     clip.frames.data() + (t + 1) * frame_elems));
    Tensor small = resize_bilinear(frame, grid_, grid_);
    std::vector<double> hidden(static_cast<size_t>(hidden_), 0.0);
    for (int64_t j = 0; j < hidden_; ++j) {
      double acc = b1_[j];
      const double* wr = w1_.data() + j * in_dim;
      for (int64_t i = 0; i < in_dim; ++i) acc += wr[i] * small[i];
      hidden[static_cast<size_t>(j)] = std::tanh(acc);
    }
    for (int64_t d = 0; d < output_dim_; ++d) {
      double acc = b2_[d];
      const double* wr = w2_.data() + d * hidden_;
      for (int64_t j = 0; j < hidden_; ++j) acc += wr[j] * hidden[static_cast<size_t>(j)];
      out.at2(t, d) = acc;
    }
  }
  return out;
}

OracleAdapter::OracleAdapter(std::string name, int64_t num_classes, int64_t output_dim,
                             uint64_t seed, double noise_scale)
    : name_(std::move(name)),
      num_classes_(num_classes),
      output_dim_(output_dim),
      noise_scale_(noise_scale),
      anchors_({num_classes, output_dim}) {
  if (output_dim < num_classes)
    throw std::invalid_argument("OracleAdapter: output_dim must be >= num_classes");
  if (noise_scale < 0.0 || noise_scale >= 0.5)
    throw std::invalid_argument("OracleAdapter: noise_scale must be in [0, 0.5)");
  // Orthonormal anchor rows via Gram-Schmidt on a seeded Gaussian matrix.
  SeedStream rng = SeedStream::from_key({seed, 0x6f72636cull});
  for (int64_t c = 0; c < num_classes_; ++c) {
    for (int64_t d = 0; d < output_dim_; ++d) anchors_.at2(c, d) = rng.normal();
    for (int64_t prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (int64_t d = 0; d < output_dim_; ++d) dot += anchors_.at2(c, d) * anchors_.at2(prev, d);
      for (int64_t d = 0; d < output_dim_; ++d) anchors_.at2(c, d) -= dot * anchors_.at2(prev, d);
    }
    double norm = 0.0;
    for (int64_t d = 0; d < output_dim_; ++d) norm += anchors_.at2(c, d) * anchors_.at2(c, d);
    norm = std::sqrt(norm);
    if (norm < 1e-9) throw std::runtime_error("OracleAdapter: anchor construction degenerated");
    for (int64_t d = 0; d < output_dim_; ++d) anchors_.at2(c, d) /= norm;
  }
}

std::optional<int64_t> OracleAdapter::classify_frame(const Tensor& frames, int64_t t) const {
  const int64_t h = frames.dim(1), w = frames.dim(2);
  double sum_sin = 0.0, sum_cos = 0.0;
  int64_t count = 0;
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double r = frames.at4(t, y, x, 0), g = frames.at4(t, y, x, 1), b = frames.at4(t, y, x, 2);
      double hh, ss, vv;
      rgb_to_hsv(r, g, b, &hh, &ss, &vv);
      if (ss > 0.35 && vv > 0.3) {
        sum_sin += std::sin(2.0 * M_PI * hh);
        sum_cos += std::cos(2.0 * M_PI * hh);
        ++count;
      }
    }
  if (count < std::max<int64_t>(4, h * w / 100)) return std::nullopt;
  double mean_hue = std::atan2(sum_sin, sum_cos) / (2.0 * M_PI);
  mean_hue -= std::floor(mean_hue);
  int64_t best = 0;
  double best_d = 1.0;
  for (int64_t c = 0; c < num_classes_; ++c) {
    double d = hue_distance(mean_hue, class_hue(c, num_classes_));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Tensor OracleAdapter::encode(const Clip& clip) const {
  const int64_t T = clip.t();
  const int64_t frame_elems = clip.frames.dim(1) * clip.frames.dim(2) * 3;
  Tensor out({T, output_dim_});
  for (int64_t t = 0; t < T; ++t) {
    std::optional<int64_t> cls = classify_frame(clip.frames, t);
    // Deterministic content-derived pseudo-noise.
    uint64_t h = fnv1a64(clip.frames.data() + t * frame_elems,
                         static_cast<size_t>(frame_elems) * sizeof(double));
    SeedStream noise_rng = SeedStream::from_key({h, 0x6e6f6973ull});
    std::vector<double> noise(static_cast<size_t>(output_dim_));
    double nn2 = 0.0;
    for (auto& v : noise) {
      v = noise_rng.normal();
      nn2 += v * v;
    }
    double nnorm = std::sqrt(std::max(nn2, 1e-30));
    int64_t c = cls ? *cls : static_cast<int64_t>(h % static_cast<uint64_t>(num_classes_));
    double acc2 = 0.0;
    for (int64_t d = 0; d < output_dim_; ++d) {
      double v = anchors_.at2(c, d) + noise_scale_ * noise[static_cast<size_t>(d)] / nnorm;
      out.at2(t, d) = v;
      acc2 += v * v;
    }
    double norm = std::sqrt(acc2);
    for (int64_t d = 0; d < output_dim_; ++d) out.at2(t, d) /= norm;
  }
  return out;
}

namespace {
constexpr char kFeatureFileMagic[8] = {'V', 'D', 'S', 'T', 'F', 'E', 'A', 'T'};
constexpr uint8_t kFeatureFileVersion = 1;
}  // namespace

void FeatureFileAdapter::write_feature_file(
    const std::string& path, const std::vector<std::pair<std::string, Tensor>>& per_video) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_feature_file: cannot open " + path);
  out.write(kFeatureFileMagic, 8);
  out.put(static_cast<char>(kFeatureFileVersion));
  uint64_t count = per_video.size();
  int64_t dim = per_video.empty() ? 0 : per_video.front().second.dim(1);
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  for (const auto& [id, feats] : per_video) {
    if (feats.ndim() != 2 || feats.dim(1) != dim)
      throw std::invalid_argument("write_feature_file: inconsistent feature dims");
    uint64_t idlen = id.size();
    int64_t n = feats.dim(0);
    out.write(reinterpret_cast<const char*>(&idlen), sizeof(idlen));
    out.write(id.data(), static_cast<std::streamsize>(idlen));
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(feats.data()),
              static_cast<std::streamsize>(feats.numel() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write_feature_file: write failed for " + path);
}

FeatureFileAdapter::FeatureFileAdapter(std::string name, const std::string& path)
    : name_(std::move(name)) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("FeatureFileAdapter: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kFeatureFileMagic, 8) != 0)
    throw std::runtime_error("FeatureFileAdapter: bad magic in " + path);
  int version = in.get();
  if (version != kFeatureFileVersion)
    throw std::runtime_error("FeatureFileAdapter: unsupported version " + std::to_string(version));
  uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  in.read(reinterpret_cast<char*>(&output_dim_), sizeof(output_dim_));
  for (uint64_t i = 0; i < count; ++i) {
    uint64_t idlen = 0;
    in.read(reinterpret_cast<char*>(&idlen), sizeof(idlen));
    std::string id(idlen, '\0');
    in.read(id.data(), static_cast<std::streamsize>(idlen));
    int64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    Tensor feats({n, output_dim_});
    in.read(reinterpret_cast<char*>(feats.data()),
            static_cast<std::streamsize>(feats.numel() * sizeof(double)));
    features_.emplace(std::move(id), std::move(feats));
  }
  if (!in) throw std::runtime_error("FeatureFileAdapter: truncated file " + path);
}

Tensor FeatureFileAdapter::encode(const Clip& clip) const {
  auto it = features_.find(clip.source_id);
  if (it == features_.end())
    throw std::runtime_error("FeatureFileAdapter: no features for video '" + clip.source_id + "'");
  const Tensor& feats = it->second;
  const int64_t T = clip.t();
  Tensor out({T, output_dim_});
  for (int64_t t = 0; t < T; ++t) {
    int64_t raw = clip.raw_index(t);
    if (raw < 0 || raw >= feats.dim(0))
      throw std::runtime_error("FeatureFileAdapter: frame index " + std::to_string(raw) +
                               " out of range for video '" + clip.source_id + "'");
    for (int64_t d = 0; d < output_dim_; ++d) out.at2(t, d) = feats.at2(raw, d);
  }
  return out;
}

// ---------------------------------------------------------------- OnlineNetwork

OnlineNetwork::OnlineNetwork(const EncoderConfig& cfg,
                             const std::vector<std::pair<std::string, int64_t>>& target_dims,
                             uint64_t seed)
    : cfg_(cfg),
      encoder_(cfg),
      projector_(cfg.channels.back(), cfg.projector_hidden, cfg.projector_dim) {
  SeedStream rng = SeedStream::from_key({seed, 0x6f6e6c6eull});
  encoder_.init(rng);
  projector_.init(rng);
  for (const auto& [name, dim] : target_dims) {
    if (!cfg_.predictor_enabled && dim != cfg_.projector_dim)
      throw std::invalid_argument(
          "OnlineNetwork: with the predictor disabled, target '" + name +
          "' must match projector_dim");
    auto mlp = std::make_unique<nn::Mlp>(cfg.projector_dim, cfg.predictor_hidden, dim);
    mlp->init(rng);
    predictors_.emplace(name, std::move(mlp));
  }
}

OnlineOutputs OnlineNetwork::forward(const Tensor& clips, bool training) {
  OnlineOutputs out;
  out.features = encoder_.forward(clips, training);  // [B, T, C]
  cached_b_ = out.features.dim(0);
  cached_t_ = out.features.dim(1);
  const int64_t C = out.features.dim(2);
  Tensor rows = out.features.reshaped({cached_b_ * cached_t_, C});
  Tensor proj_rows = projector_.forward(rows, training);
  out.projection = proj_rows.reshaped({cached_b_, cached_t_, cfg_.projector_dim});
  for (auto& [name, mlp] : predictors_) {
    if (cfg_.predictor_enabled) {
      Tensor q = mlp->forward(proj_rows, training);
      out.predictions[name] = q.reshaped({cached_b_, cached_t_, q.dim(1)});
    } else {
      out.predictions[name] = out.projection;
    }
  }
  return out;
}

void OnlineNetwork::backward(const std::map<std::string, Tensor>& dq,
                             const Tensor* dprojection_extra) {
  Tensor dproj({cached_b_ * cached_t_, cfg_.projector_dim});
  for (const auto& [name, grad] : dq) {
    auto it = predictors_.find(name);
    if (it == predictors_.end())
      throw std::invalid_argument("OnlineNetwork: unknown prediction head '" + name + "'");
    Tensor g = grad.reshaped({cached_b_ * cached_t_, grad.dim(2)});
    if (cfg_.predictor_enabled) {
      dproj.add_scaled(it->second->backward(g), 1.0);
    } else {
      dproj.add_scaled(g, 1.0);
    }
  }
  if (dprojection_extra)
    dproj.add_scaled(
        dprojection_extra->reshaped({cached_b_ * cached_t_, cfg_.projector_dim}), 1.0);
  Tensor drows = projector_.backward(dproj);
  encoder_.backward(drows.reshaped({cached_b_, cached_t_, cfg_.channels.back()}));
  // Note: predictor heads not named in dq contribute nothing this pass.
}

void OnlineNetwork::zero_grad() {
  for (auto& p : parameters()) p.grad->fill(0.0);
}

std::vector<nn::ParamRef> OnlineNetwork::parameters() {
  std::vector<nn::ParamRef> out;
  encoder_.collect_parameters("encoder", out);
  projector_.collect_parameters("projector", out);
  for (auto& [name, mlp] : predictors_) mlp->collect_parameters("predictor." + name, out);
  return out;
}

std::vector<nn::StateRef> OnlineNetwork::state() {
  std::vector<nn::StateRef> out;
  encoder_.collect_state("encoder", out);
  projector_.collect_state("projector", out);
  for (auto& [name, mlp] : predictors_) mlp->collect_state("predictor." + name, out);
  return out;
}

ClipEncoding encode_online(OnlineNetwork& net, const Clip& clip, bool training) {
  const auto& s = clip.frames.shape();
  Tensor batch = clip.frames.reshaped({1, s[0], s[1], s[2], s[3]});
  OnlineOutputs out = net.forward(batch, training);
  ClipEncoding enc;
  const int64_t T = out.projection.dim(1);
  enc.features = out.projection.reshaped({T, out.projection.dim(2)});
  for (const auto& [name, q] : out.predictions)
    enc.predictions[name] = q.reshaped({T, q.dim(2)});
  return enc;
}

Tensor encode_target(const TargetAdapter& adapter, const Clip& clip) {
  Tensor k = adapter.encode(clip);
  if (k.ndim() != 2 || k.dim(0) != clip.t() || k.dim(1) != adapter.output_dim())
    throw std::runtime_error("encode_target: adapter '" + adapter.name() +
                             "' violated the [T, output_dim] contract");
  return k;
}

// ---------------------------------------------------------------- momentum branch

MomentumState::MomentumState(const EncoderConfig& cfg, uint64_t seed)
    : encoder_(cfg), projector_(cfg.channels.back(), cfg.projector_hidden, cfg.projector_dim) {
  SeedStream rng = SeedStream::from_key({seed, 0x6d6f6d00ull});
  encoder_.init(rng);
  projector_.init(rng);
}

std::vector<nn::StateRef> MomentumState::tensors() {
  std::vector<nn::StateRef> out;
  std::vector<nn::ParamRef> params;
  encoder_.collect_parameters("encoder", params);
  projector_.collect_parameters("projector", params);
  for (auto& p : params) out.push_back({p.name, p.value});
  encoder_.collect_state("encoder", out);
  projector_.collect_state("projector", out);
  return out;
}

namespace {

std::vector<nn::StateRef> online_mirror_tensors(OnlineNetwork& online) {
  std::vector<nn::StateRef> out;
  std::vector<nn::ParamRef> params;
  online.encoder().collect_parameters("encoder", params);
  online.projector().collect_parameters("projector", params);
  for (auto& p : params) out.push_back({p.name, p.value});
  online.encoder().collect_state("encoder", out);
  online.projector().collect_state("projector", out);
  return out;
}

}  // namespace

void MomentumState::copy_from(OnlineNetwork& online) { ema_update_from(online, 0.0); }

void MomentumState::ema_update_from(OnlineNetwork& online, double m) {
  auto mine = tensors();
  auto theirs = online_mirror_tensors(online);
  ema_update(mine, theirs, m);
}

Tensor MomentumState::forward(const Tensor& clips, bool training) {
  Tensor feats = encoder_.forward(clips, training);
  const int64_t B = feats.dim(0), T = feats.dim(1), C = feats.dim(2);
  Tensor proj = projector_.forward(feats.reshaped({B * T, C}), training);
  return proj.reshaped({B, T, proj.dim(1)});
}

void ema_update(std::vector<nn::StateRef>& momentum, const std::vector<nn::StateRef>& online,
                double m) {
  if (m < 0.0 || m > 1.0) throw std::invalid_argument("ema_update: m must be in [0,1]");
  if (momentum.size() != online.size())
    throw std::invalid_argument("ema_update: tensor count mismatch");
  for (size_t i = 0; i < momentum.size(); ++i) {
    Tensor& dst = *momentum[i].value;
    const Tensor& src = *online[i].value;
    if (!dst.same_shape(src))
      throw std::invalid_argument("ema_update: shape mismatch at " + momentum[i].name);
    for (int64_t j = 0; j < dst.numel(); ++j) dst[j] = m * dst[j] + (1.0 - m) * src[j];
  }
}

// ---------------------------------------------------------------- inflation

void init_from_inflation(OnlineNetwork& online,
                         const std::vector<ImageConvWeights>& image_weights) {
  VideoEncoder& enc = online.encoder();
  if (image_weights.size() != enc.num_blocks())
    throw std::invalid_argument("init_from_inflation: expected " +
                                std::to_string(enc.num_blocks()) + " conv weight sets");
  for (size_t i = 0; i < image_weights.size(); ++i) {
    nn::Conv3d& conv = enc.conv(i);
    const Tensor& w2d = image_weights[i].weight;
    Tensor& w3d = conv.weight.value;
    if (w2d.ndim() != 4 || w2d.dim(0) != w3d.dim(0) || w2d.dim(1) != w3d.dim(1) ||
        w2d.dim(2) != w3d.dim(3) || w2d.dim(3) != w3d.dim(4))
      throw std::invalid_argument("init_from_inflation: kernel shape mismatch at block " +
                                  std::to_string(i));
    const int64_t kt = w3d.dim(2);
    const int64_t co = w3d.dim(0), ci = w3d.dim(1), kh = w3d.dim(3), kw = w3d.dim(4);
    for (int64_t o = 0; o < co; ++o)
      for (int64_t c = 0; c < ci; ++c)
        for (int64_t t = 0; t < kt; ++t)
          for (int64_t y = 0; y < kh; ++y)
            for (int64_t x = 0; x < kw; ++x)
              w3d.at5(o, c, t, y, x) = w2d.at4(o, c, y, x) / static_cast<double>(kt);
    if (image_weights[i].bias.numel() != conv.bias.value.numel())
      throw std::invalid_argument("init_from_inflation: bias shape mismatch at block " +
                                  std::to_string(i));
    conv.bias.value = image_weights[i].bias;
  }
}

}  // namespace vidistill
