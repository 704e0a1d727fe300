// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "vidistill/dataset.hpp"
#include "vidistill/rng.hpp"
#include "vidistill/tensor.hpp"

namespace vidistill {

/// Spatial augmentation recipe. Defaults are the desk-scale geometry with the
/// reference probabilities; the full-scale values ([256,320] resize, 224 crop)
/// stay expressible through config.
struct AugConfig {
  int64_t resize_short_lo = 32;
  int64_t resize_short_hi = 40;
  int64_t crop_size = 28;
  double hflip_prob = 0.5;
  double jitter_prob = 0.8;
  double jitter_brightness = 0.2;
  double jitter_contrast = 0.2;
  double jitter_saturation = 0.2;
  double jitter_hue = 0.05;
  double grayscale_prob = 0.2;
  double blur_prob = 0.5;
  double blur_sigma_lo = 0.1;
  double blur_sigma_hi = 2.0;
  std::string interpolation = "bilinear";  // recorded so the choice is auditable

  void validate() const;
};

/// One parameter draw per clip; the same params are applied to every frame.
struct AugParams {
  int64_t resize_short = 0;
  int64_t crop_top = 0;
  int64_t crop_left = 0;
  int64_t crop_size = 0;
  bool flip = false;
  bool apply_jitter = false;
  std::array<double, 4> jitter_factors = {1.0, 1.0, 1.0, 0.0};  // b, c, s, h
  bool apply_gray = false;
  std::optional<double> blur_sigma;
};

/// Resized dims for a frame whose shorter side is scaled to resize_short,
/// aspect preserved.
void resized_dims(int64_t h, int64_t w, int64_t resize_short, int64_t* out_h, int64_t* out_w);

/// Bilinear resize with half-pixel centers (frame is [H, W, 3]).
Tensor resize_bilinear(const Tensor& frame, int64_t out_h, int64_t out_w);

/// Separable Gaussian blur, kernel radius ceil(3*sigma), reflect padding
/// (edge pixel included in the mirror).
Tensor gaussian_blur(const Tensor& frame, double sigma);

/// Brightness / contrast / saturation / hue, applied in that fixed order,
/// clamped to [0,1] at the end. h rotates hue by a fraction of a full turn.
Tensor color_jitter(const Tensor& frame, double b, double c, double s, double h);

/// All three channels replaced by Rec.601 luminance.
Tensor to_grayscale(const Tensor& frame);

Tensor hflip(const Tensor& frame);

/// Square crop of a frame; box must lie fully inside.
Tensor crop_frame(const Tensor& frame, int64_t top, int64_t left, int64_t size);

/// Draw the per-clip augmentation parameters. The draw order is fixed
/// (resize, crop, flip, jitter gate, jitter factors, grayscale gate, blur
/// gate, sigma) and every field is drawn unconditionally so the stream
/// consumption does not depend on the gates.
AugParams draw_aug_params(const AugConfig& cfg, int64_t frame_h, int64_t frame_w, SeedStream& rng);

/// Apply one parameter set consistently to every frame of the clip:
/// resize -> crop -> flip -> jitter -> grayscale -> blur.
Clip apply_aug(const Clip& clip, const AugParams& params);

}  // namespace vidistill
