// SPDX-License-Identifier: Apache-2.0
#include "vidistill/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "vidistill/color.hpp"

namespace vidistill {

void AugConfig::validate() const {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(hflip_prob) || !prob_ok(jitter_prob) || !prob_ok(grayscale_prob) ||
      !prob_ok(blur_prob))
    throw std::invalid_argument("AugConfig: probabilities must lie in [0,1]");
  if (resize_short_lo < 1 || resize_short_hi < resize_short_lo)
    throw std::invalid_argument("AugConfig: invalid resize_short range");
  if (crop_size < 1 || crop_size > resize_short_lo)
    throw std::invalid_argument("AugConfig: crop_size must be <= resize_short_lo");
  if (blur_sigma_lo <= 0.0 || blur_sigma_hi < blur_sigma_lo)
    throw std::invalid_argument("AugConfig: blur sigma range must be within (0, inf)");
  if (jitter_brightness < 0 || jitter_contrast < 0 || jitter_saturation < 0 || jitter_hue < 0)
    throw std::invalid_argument("AugConfig: jitter strengths must be >= 0");
  if (interpolation != "bilinear")
    throw std::invalid_argument("AugConfig: unsupported interpolation '" + interpolation + "'");
}

void resized_dims(int64_t h, int64_t w, int64_t resize_short, int64_t* out_h, int64_t* out_w) {
  if (h < 1 || w < 1 || resize_short < 1)
    throw std::invalid_argument("resized_dims: degenerate geometry");
  if (h <= w) {
    *out_h = resize_short;
    *out_w = std::max<int64_t>(resize_short,
                               llround(static_cast<double>(w) * resize_short / h));
  } else {
    *out_w = resize_short;
    *out_h = std::max<int64_t>(resize_short,
                               llround(static_cast<double>(h) * resize_short / w));
  }
}

Tensor resize_bilinear(const Tensor& frame, int64_t out_h, int64_t out_w) {
  const int64_t h = frame.dim(0), w = frame.dim(1);
  Tensor out({out_h, out_w, 3});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int64_t y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int64_t y0 = static_cast<int64_t>(std::floor(fy));
    double wy = fy - y0;
    int64_t y0c = std::clamp<int64_t>(y0, 0, h - 1);
    int64_t y1c = std::clamp<int64_t>(y0 + 1, 0, h - 1);
    for (int64_t x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int64_t x0 = static_cast<int64_t>(std::floor(fx));
      double wx = fx - x0;
      int64_t x0c = std::clamp<int64_t>(x0, 0, w - 1);
      int64_t x1c = std::clamp<int64_t>(x0 + 1, 0, w - 1);
      for (int64_t c = 0; c < 3; ++c) {
        double v = (1 - wy) * ((1 - wx) * frame.at3(y0c, x0c, c) + wx * frame.at3(y0c, x1c, c)) +
                   wy * ((1 - wx) * frame.at3(y1c, x0c, c) + wx * frame.at3(y1c, x1c, c));
        out.at3(y, x, c) = v;
      }
    }
  }
  return out;
}

namespace {

// Mirror index into [0, n) including the edge pixel: -1 -> 0, n -> n-1.
int64_t reflect_index(int64_t i, int64_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

std::vector<double> gaussian_kernel(double sigma, int64_t* radius) {
  *radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<size_t>(2 * *radius + 1));
  double sum = 0.0;
  for (int64_t i = -*radius; i <= *radius; ++i) {
    double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + *radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

Tensor gaussian_blur(const Tensor& frame, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_blur: sigma must be > 0");
  const int64_t h = frame.dim(0), w = frame.dim(1);
  int64_t r = 0;
  std::vector<double> k = gaussian_kernel(sigma, &r);

  Tensor tmp({h, w, 3});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int64_t d = -r; d <= r; ++d)
          acc += k[static_cast<size_t>(d + r)] * frame.at3(y, reflect_index(x + d, w), c);
        tmp.at3(y, x, c) = acc;
      }
  Tensor out({h, w, 3});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int64_t d = -r; d <= r; ++d)
          acc += k[static_cast<size_t>(d + r)] * tmp.at3(reflect_index(y + d, h), x, c);
        out.at3(y, x, c) = acc;
      }
  return out;
}

Tensor color_jitter(const Tensor& frame, double b, double c, double s, double h) {
  const int64_t H = frame.dim(0), W = frame.dim(1);
  Tensor out = frame;

  // Brightness: plain scaling.
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b;

  // Contrast: blend toward the frame's grayscale mean.
  double mean_gray = 0.0;
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x)
      mean_gray += luminance(out.at3(y, x, 0), out.at3(y, x, 1), out.at3(y, x, 2));
  mean_gray /= static_cast<double>(H * W);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = mean_gray + c * (out[i] - mean_gray);

  // Saturation: blend toward per-pixel grayscale.
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      double g = luminance(out.at3(y, x, 0), out.at3(y, x, 1), out.at3(y, x, 2));
      for (int64_t ch = 0; ch < 3; ++ch) out.at3(y, x, ch) = g + s * (out.at3(y, x, ch) - g);
    }

  // Hue: rotate by h of a full turn in HSV.
  if (h != 0.0) {
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W; ++x) {
        double hh, ss, vv;
        rgb_to_hsv(out.at3(y, x, 0), out.at3(y, x, 1), out.at3(y, x, 2), &hh, &ss, &vv);
        double rgb[3];
        hsv_to_rgb(hh + h, ss, vv, rgb);
        for (int64_t ch = 0; ch < 3; ++ch) out.at3(y, x, ch) = rgb[ch];
      }
  }

  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
  return out;
}

Tensor to_grayscale(const Tensor& frame) {
  const int64_t H = frame.dim(0), W = frame.dim(1);
  Tensor out({H, W, 3});
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      double g = luminance(frame.at3(y, x, 0), frame.at3(y, x, 1), frame.at3(y, x, 2));
      for (int64_t c = 0; c < 3; ++c) out.at3(y, x, c) = g;
    }
  return out;
}

Tensor hflip(const Tensor& frame) {
  const int64_t H = frame.dim(0), W = frame.dim(1);
  Tensor out({H, W, 3});
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x)
      for (int64_t c = 0; c < 3; ++c) out.at3(y, x, c) = frame.at3(y, W - 1 - x, c);
  return out;
}

AugParams draw_aug_params(const AugConfig& cfg, int64_t frame_h, int64_t frame_w,
                          SeedStream& rng) {
  cfg.validate();
  AugParams p;
  p.resize_short = rng.uniform_int(cfg.resize_short_lo, cfg.resize_short_hi);
  int64_t rh = 0, rw = 0;
  resized_dims(frame_h, frame_w, p.resize_short, &rh, &rw);
  if (rh < cfg.crop_size || rw < cfg.crop_size)
    throw std::invalid_argument("draw_aug_params: resized frame too small for crop");
  p.crop_size = cfg.crop_size;
  p.crop_top = rng.uniform_int(0, rh - cfg.crop_size);
  p.crop_left = rng.uniform_int(0, rw - cfg.crop_size);
  p.flip = rng.bernoulli(cfg.hflip_prob);
  p.apply_jitter = rng.bernoulli(cfg.jitter_prob);
  p.jitter_factors[0] = rng.uniform(1.0 - cfg.jitter_brightness, 1.0 + cfg.jitter_brightness);
  p.jitter_factors[1] = rng.uniform(1.0 - cfg.jitter_contrast, 1.0 + cfg.jitter_contrast);
  p.jitter_factors[2] = rng.uniform(1.0 - cfg.jitter_saturation, 1.0 + cfg.jitter_saturation);
  p.jitter_factors[3] = rng.uniform(-cfg.jitter_hue, cfg.jitter_hue);
  p.apply_gray = rng.bernoulli(cfg.grayscale_prob);
  bool apply_blur = rng.bernoulli(cfg.blur_prob);
  double sigma = rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
  if (apply_blur) p.blur_sigma = sigma;
  return p;
}

Tensor crop_frame(const Tensor& frame, int64_t top, int64_t left, int64_t size) {
  if (top < 0 || left < 0 || top + size > frame.dim(0) || left + size > frame.dim(1))
    throw std::invalid_argument("crop_frame: crop box outside frame");
  Tensor out({size, size, 3});
  for (int64_t y = 0; y < size; ++y)
    for (int64_t x = 0; x < size; ++x)
      for (int64_t c = 0; c < 3; ++c) out.at3(y, x, c) = frame.at3(top + y, left + x, c);
  return out;
}

Clip apply_aug(const Clip& clip, const AugParams& params) {
  const int64_t T = clip.t();
  const int64_t h = clip.frames.dim(1), w = clip.frames.dim(2);
  int64_t rh = 0, rw = 0;
  resized_dims(h, w, params.resize_short, &rh, &rw);

  Clip out;
  out.source_id = clip.source_id;
  out.start = clip.start;
  out.stride = clip.stride;
  out.frames = Tensor({T, params.crop_size, params.crop_size, 3});

  const int64_t frame_elems = h * w * 3;
  const int64_t out_elems = params.crop_size * params.crop_size * 3;
  for (int64_t t = 0; t < T; ++t) {
    Tensor frame({h, w, 3},
                 std::vector<double>(clip.frames.data() + t * frame_elems,
                                     clip.frames.data() + (t + 1) * frame_elems));
    Tensor f = resize_bilinear(frame, rh, rw);
    f = crop_frame(f, params.crop_top, params.crop_left, params.crop_size);
    if (params.flip) f = hflip(f);
    if (params.apply_jitter)
      f = color_jitter(f, params.jitter_factors[0], params.jitter_factors[1],
                       params.jitter_factors[2], params.jitter_factors[3]);
    if (params.apply_gray) f = to_grayscale(f);
    if (params.blur_sigma) f = gaussian_blur(f, *params.blur_sigma);
    for (int64_t i = 0; i < out_elems; ++i)
      out.frames[t * out_elems + i] = std::clamp(f[i], 0.0, 1.0);
  }
  return out;
}

}  // namespace vidistill
