// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vidistill/dataset.hpp"
#include "vidistill/encoders.hpp"
#include "vidistill/nn.hpp"
#include "vidistill/tensor.hpp"

namespace vidistill {

/// L2-normalized frozen features with their labels and source ids.
struct FeatureBank {
  Tensor features;  // [N, D], rows unit norm
  std::vector<int64_t> labels;
  std::vector<std::string> ids;

  int64_t size() const { return features.empty() ? 0 : features.dim(0); }
  int64_t dim() const { return features.empty() ? 0 : features.dim(1); }
  int64_t num_classes() const;
  void validate() const;

  void save(const std::string& path) const;
  static FeatureBank load(const std::string& path);
};

struct EvalReport {
  std::string protocol;
  double top1 = 0.0;
  std::vector<double> per_class;
  std::string config_snapshot;
  double wall_seconds = 0.0;
};

/// Deterministic test-time geometry: clip length/stride plus the spatial
/// resize/crop applied to evaluation views.
struct EvalGeometry {
  int64_t clip_frames = 8;
  int64_t clip_stride = 8;
  int64_t crop_size = 28;
  int64_t resize_short = 36;  // single-crop path; 3-crop resizes to crop_size
};

struct ProbeConfig {
  int64_t epochs = 30;
  int64_t warmup_epochs = 8;
  double base_lr = 1.0;
  int64_t batch_size = 64;
  double momentum = 0.9;
};

struct FinetuneConfig {
  int64_t epochs = 10;
  int64_t warmup_epochs = 2;
  double base_lr = 0.05;
  int64_t batch_size = 16;
  double momentum = 0.9;
};

/// Uniformly spaced clip starts covering the admissible range, clamped at
/// both ends; clips == 1 gives the centered window.
std::vector<int64_t> dense_clip_starts(int64_t num_frames, int64_t T, int64_t tau, int64_t clips);

/// Deterministic evaluation views of one clip (no augmentation): 1 crop =
/// short-side resize + center crop; 3 crops = left/center/right along the
/// longer side after resizing the short side to crop_size.
std::vector<Tensor> eval_views_of_clip(const Clip& clip, int64_t crops, const EvalGeometry& geom);

/// Mean of unit feature rows, re-normalized. A near-zero mean (e.g. antipodal
/// features) is surfaced as an error, never silently normalized.
Tensor combine_view_features(const std::vector<Tensor>& unit_rows);

/// Frozen features per video: every clip/crop view is encoded in evaluation
/// mode, per-view features are unit-normalized, averaged, and re-normalized.
FeatureBank extract_features(OnlineNetwork& net, const std::vector<VideoRecord>& records,
                             const EvalGeometry& geom, int64_t clips_per_video,
                             int64_t crops_per_clip);

/// Weighted kNN vote: the k most cosine-similar rows vote with weight
/// exp(similarity / temperature); ties over classes break toward the lowest
/// class index. Returns the predicted class and the per-class scores.
std::pair<int64_t, std::vector<double>> knn_classify(const FeatureBank& bank, const Tensor& query,
                                                     int64_t k, double temperature);

/// Fraction of validation rows whose kNN prediction matches their label.
double knn_top1(const FeatureBank& bank_train, const FeatureBank& bank_val, int64_t k,
                double temperature);

/// Stratified subset: per class, max(1, round-half-even(fraction * count))
/// videos without replacement, deterministic under seed. Returns indices into
/// `records`, ascending. Subsets of the same seed nest across fractions.
std::vector<size_t> semi_split(const std::vector<VideoRecord>& records, double fraction,
                               uint64_t seed);

/// Momentum-SGD linear classifier on frozen bank rows (warmup + cosine lr).
nn::Linear train_linear_head(const FeatureBank& bank, int64_t num_classes, const ProbeConfig& cfg,
                             uint64_t seed);

/// Mean softmax over clips x crops dense views of one video.
std::vector<double> multi_view_predict(OnlineNetwork& net, nn::Linear& head,
                                       const VideoRecord& video, int64_t clips, int64_t crops,
                                       const EvalGeometry& geom);

/// Linear evaluation: frozen features -> linear head -> multi-view top-1.
/// Asserts the encoder parameters are bit-identical before and after.
EvalReport linear_probe(OnlineNetwork& net, const std::vector<VideoRecord>& train,
                        const std::vector<VideoRecord>& val, int64_t num_classes,
                        const EvalGeometry& geom, const ProbeConfig& cfg, int64_t eval_clips,
                        int64_t eval_crops, uint64_t seed);

/// Supervised fine-tuning of the full network plus a linear head.
EvalReport finetune(OnlineNetwork& net, const std::vector<VideoRecord>& train,
                    const std::vector<VideoRecord>& val, int64_t num_classes,
                    const EvalGeometry& geom, const FinetuneConfig& cfg, int64_t eval_clips,
                    int64_t eval_crops, uint64_t seed);

/// Shared schedule shape: linear ramp from 0, cosine to min afterwards.
double warmup_cosine_lr(int64_t step, int64_t total_steps, int64_t warmup_steps, double base,
                        double min_lr = 0.0);

}  // namespace vidistill
