// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>

namespace vidistill {

/// Rec.601 luminance; the project-wide grayscale convention.
inline double luminance(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

/// h in turns [0,1); s, v in [0,1]. Tolerates v slightly outside [0,1].
inline void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  h = h - std::floor(h);
  double c = v * s;
  double h6 = h * 6.0;
  double x = c * (1.0 - std::fabs(std::fmod(h6, 2.0) - 1.0));
  double m = v - c;
  double r = 0, g = 0, b = 0;
  if (h6 < 1)      { r = c; g = x; }
  else if (h6 < 2) { r = x; g = c; }
  else if (h6 < 3) { g = c; b = x; }
  else if (h6 < 4) { g = x; b = c; }
  else if (h6 < 5) { r = x; b = c; }
  else             { r = c; b = x; }
  rgb[0] = r + m;
  rgb[1] = g + m;
  rgb[2] = b + m;
}

/// Inverse of hsv_to_rgb on real-valued inputs. h in turns.
inline void rgb_to_hsv(double r, double g, double b, double* h, double* s, double* v) {
  double mx = std::max({r, g, b});
  double mn = std::min({r, g, b});
  double chroma = mx - mn;
  *v = mx;
  *s = (mx > 1e-12) ? chroma / mx : 0.0;
  if (chroma < 1e-12) {
    *h = 0.0;
    return;
  }
  double hh;
  if (mx == r)      hh = std::fmod((g - b) / chroma, 6.0);
  else if (mx == g) hh = (b - r) / chroma + 2.0;
  else              hh = (r - g) / chroma + 4.0;
  if (hh < 0) hh += 6.0;
  *h = hh / 6.0;
}

/// Circular distance between hues in turns, result in [0, 0.5].
inline double hue_distance(double a, double b) {
  double d = std::fabs(a - b);
  d = d - std::floor(d);
  return std::min(d, 1.0 - d);
}

}  // namespace vidistill
