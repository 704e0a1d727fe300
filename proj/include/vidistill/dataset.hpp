// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vidistill/rng.hpp"
#include "vidistill/tensor.hpp"

namespace vidistill {

enum class Split : uint8_t { train = 0, val = 1 };

/// A raw frame sequence. The unit of the dataset: immutable once built.
struct VideoRecord {
  std::string id;
  std::vector<uint8_t> frames;  // N*H*W*3, row-major, values 0..255
  int64_t num_frames = 0;
  int64_t height = 0;
  int64_t width = 0;
  std::optional<int64_t> label;
  Split split = Split::train;

  int64_t frame_bytes() const { return height * width * 3; }
  const uint8_t* frame(int64_t n) const { return frames.data() + n * frame_bytes(); }
};

/// T frames taken from a raw window with stride tau, rescaled to [0,1].
struct Clip {
  Tensor frames;  // [T, h, w, 3]
  std::string source_id;
  int64_t start = 0;
  int64_t stride = 1;

  int64_t t() const { return frames.dim(0); }
  int64_t raw_index(int64_t frame) const { return start + frame * stride; }
};

/// One reference clip (target input) plus the online-view clips.
struct ViewSet {
  Clip v_ref;
  std::vector<Clip> online_views;  // length 1 or 2
  std::string source_id;
};

/// Color assigned to a class by the synthetic generator; also consumed by the
/// oracle target adapter. Hues are spread evenly over the circle.
void class_color(int64_t cls, int64_t num_classes, double rgb[3]);
double class_hue(int64_t cls, int64_t num_classes);

/// Generate the synthetic corpus. Each class is a motion program: a colored
/// square translating with class-specific velocity over a static structured
/// noise background, so both appearance and dynamics carry the class.
std::vector<VideoRecord> make_synthetic_dataset(int64_t num_classes, int64_t videos_per_class,
                                                int64_t raw_frames, int64_t spatial_size,
                                                uint64_t seed);

/// Minimum raw length admitting a (T, tau) window.
inline int64_t clip_span(int64_t T, int64_t tau) { return (T - 1) * tau + 1; }

/// Uniformly sample a clip start and gather frames start, start+tau, ...
/// Throws if the video is too short; windows are never clamped.
Clip sample_clip(const VideoRecord& video, int64_t T, int64_t tau, SeedStream& rng);

/// Deterministic clip at a given start (used by dense evaluation sampling).
Clip clip_at(const VideoRecord& video, int64_t start, int64_t T, int64_t tau);

/// Draw v_ref plus num_online_views independently sampled online clips.
/// num_online_views == 0 reuses the reference window as the sole online view
/// (spatial augmentation is still drawn per consumer, downstream).
/// anchored_ref centers the reference window instead of sampling it.
ViewSet sample_views(const VideoRecord& video, int64_t num_online_views, int64_t T, int64_t tau,
                     SeedStream& rng, bool anchored_ref = false);

/// Container round-trip: manifest (id, label, split, shape) + raw blobs.
void save_dataset(const std::vector<VideoRecord>& records, const std::string& path);
std::vector<VideoRecord> load_dataset(const std::string& path);

}  // namespace vidistill
