// SPDX-License-Identifier: Apache-2.0
#include "vidistill/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "vidistill/color.hpp"

namespace vidistill {

using nlohmann::json;

double class_hue(int64_t cls, int64_t num_classes) {
  return static_cast<double>(cls) / static_cast<double>(num_classes);
}

void class_color(int64_t cls, int64_t num_classes, double rgb[3]) {
  hsv_to_rgb(class_hue(cls, num_classes), 0.9, 1.0, rgb);
}

namespace {

// Coarse random grid bilinearly upsampled: a static background pattern that
// differs per video. Each cell carries a mild chromatic tint, enough to make
// global color statistics video-specific but kept well under the saturation
// of the moving square so the class signature stays decodable.
void fill_background(std::vector<double>& bg, int64_t size, SeedStream& rng) {
  constexpr int64_t kGrid = 8;
  constexpr double kTint = 0.04;
  std::vector<double> grid(kGrid * kGrid * 4);  // luminance + rgb tint per cell
  for (int64_t i = 0; i < kGrid * kGrid; ++i) {
    grid[static_cast<size_t>(i * 4)] = rng.uniform();
    for (int64_t c = 0; c < 3; ++c)
      grid[static_cast<size_t>(i * 4 + 1 + c)] = rng.uniform(-kTint, kTint);
  }
  double channel_offset[3] = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
                              rng.uniform(-0.02, 0.02)};
  bg.assign(static_cast<size_t>(size * size * 3), 0.0);
  for (int64_t y = 0; y < size; ++y) {
    for (int64_t x = 0; x < size; ++x) {
      double gy = (static_cast<double>(y) + 0.5) * kGrid / size - 0.5;
      double gx = (static_cast<double>(x) + 0.5) * kGrid / size - 0.5;
      int64_t y0 = static_cast<int64_t>(std::floor(gy));
      int64_t x0 = static_cast<int64_t>(std::floor(gx));
      double fy = gy - y0, fx = gx - x0;
      auto sample = [&](int64_t yy, int64_t xx, int64_t ch) {
        yy = std::clamp<int64_t>(yy, 0, kGrid - 1);
        xx = std::clamp<int64_t>(xx, 0, kGrid - 1);
        return grid[static_cast<size_t>((yy * kGrid + xx) * 4 + ch)];
      };
      auto lerp = [&](int64_t ch) {
        return (1 - fy) * ((1 - fx) * sample(y0, x0, ch) + fx * sample(y0, x0 + 1, ch)) +
               fy * ((1 - fx) * sample(y0 + 1, x0, ch) + fx * sample(y0 + 1, x0 + 1, ch));
      };
      double base = 0.35 + 0.25 * lerp(0);
      for (int64_t c = 0; c < 3; ++c) {
        double val = std::clamp(base + lerp(1 + c) + channel_offset[c], 0.0, 1.0);
        bg[static_cast<size_t>((y * size + x) * 3 + c)] = val;
      }
    }
  }
}

uint8_t quantize(double v) {
  double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<uint8_t>(q);
}

}  // namespace

std::vector<VideoRecord> make_synthetic_dataset(int64_t num_classes, int64_t videos_per_class,
                                                int64_t raw_frames, int64_t spatial_size,
                                                uint64_t seed) {
  if (num_classes < 1 || videos_per_class < 1 || raw_frames < 1 || spatial_size < 1)
    throw std::invalid_argument("make_synthetic_dataset: all arguments must be >= 1");

  const int64_t size = spatial_size;
  const int64_t side = std::max<int64_t>(4, size / 4);
  std::vector<VideoRecord> records;
  records.reserve(static_cast<size_t>(num_classes * videos_per_class));

  for (int64_t cls = 0; cls < num_classes; ++cls) {
    double rgb[3];
    class_color(cls, num_classes, rgb);
    // The motion program: direction from the class angle, speed cycling over
    // a small set so every class has a distinct velocity vector.
    double angle = 2.0 * M_PI * static_cast<double>(cls) / num_classes;
    double speed = 1.0 + 0.5 * static_cast<double>(cls % 3);
    double vx = speed * std::cos(angle);
    double vy = speed * std::sin(angle);

    for (int64_t v = 0; v < videos_per_class; ++v) {
      SeedStream rng = SeedStream::from_key({seed, 0x64617461ull, static_cast<uint64_t>(cls),
                                             static_cast<uint64_t>(v)});
      std::vector<double> bg;
      fill_background(bg, size, rng);
      double x0 = rng.uniform(0.0, static_cast<double>(size));
      double y0 = rng.uniform(0.0, static_cast<double>(size));
      double brightness = rng.uniform(0.85, 1.0);

      VideoRecord rec;
      rec.id = "c" + std::to_string(cls) + "_v" + std::to_string(v);
      rec.label = cls;
      rec.num_frames = raw_frames;
      rec.height = size;
      rec.width = size;
      rec.frames.resize(static_cast<size_t>(raw_frames * size * size * 3));

      for (int64_t t = 0; t < raw_frames; ++t) {
        uint8_t* frame = rec.frames.data() + t * rec.frame_bytes();
        for (int64_t i = 0; i < size * size * 3; ++i) frame[i] = quantize(bg[static_cast<size_t>(i)]);
        // Square position on a torus so it never leaves the frame.
        double px = std::fmod(std::fmod(x0 + t * vx, static_cast<double>(size)) + size, static_cast<double>(size));
        double py = std::fmod(std::fmod(y0 + t * vy, static_cast<double>(size)) + size, static_cast<double>(size));
        int64_t ix = static_cast<int64_t>(std::floor(px));
        int64_t iy = static_cast<int64_t>(std::floor(py));
        for (int64_t dy = 0; dy < side; ++dy) {
          for (int64_t dx = 0; dx < side; ++dx) {
            int64_t yy = (iy + dy) % size;
            int64_t xx = (ix + dx) % size;
            for (int64_t c = 0; c < 3; ++c)
              frame[(yy * size + xx) * 3 + c] = quantize(rgb[c] * brightness);
          }
        }
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

Clip clip_at(const VideoRecord& video, int64_t start, int64_t T, int64_t tau) {
  if (T < 1 || tau < 1) throw std::invalid_argument("clip_at: T and tau must be >= 1");
  int64_t span = clip_span(T, tau);
  if (start < 0 || start + span > video.num_frames)
    throw std::invalid_argument("clip_at: window [" + std::to_string(start) + ", +" +
                                std::to_string(span) + ") out of range for video of length " +
                                std::to_string(video.num_frames));
  Clip clip;
  clip.frames = Tensor({T, video.height, video.width, 3});
  clip.source_id = video.id;
  clip.start = start;
  clip.stride = tau;
  const int64_t fb = video.frame_bytes();
  for (int64_t t = 0; t < T; ++t) {
    const uint8_t* src = video.frame(start + t * tau);
    double* dst = clip.frames.data() + t * fb;
    for (int64_t i = 0; i < fb; ++i) dst[i] = static_cast<double>(src[i]) / 255.0;
  }
  return clip;
}

Clip sample_clip(const VideoRecord& video, int64_t T, int64_t tau, SeedStream& rng) {
  if (T < 1 || tau < 1) throw std::invalid_argument("sample_clip: T and tau must be >= 1");
  int64_t span = clip_span(T, tau);
  if (video.num_frames < span)
    throw std::invalid_argument("sample_clip: video '" + video.id + "' has " +
                                std::to_string(video.num_frames) + " frames, needs " +
                                std::to_string(span));
  int64_t start = rng.uniform_int(0, video.num_frames - span);
  return clip_at(video, start, T, tau);
}

ViewSet sample_views(const VideoRecord& video, int64_t num_online_views, int64_t T, int64_t tau,
                     SeedStream& rng, bool anchored_ref) {
  if (num_online_views < 0 || num_online_views > 2)
    throw std::invalid_argument("sample_views: num_online_views must be in {0,1,2}");
  ViewSet vs;
  vs.source_id = video.id;
  if (anchored_ref) {
    int64_t start = (video.num_frames - clip_span(T, tau)) / 2;
    vs.v_ref = clip_at(video, start, T, tau);
  } else {
    vs.v_ref = sample_clip(video, T, tau, rng);
  }
  if (num_online_views == 0) {
    vs.online_views.push_back(vs.v_ref);  // same temporal window; augmented per consumer
  } else {
    for (int64_t i = 0; i < num_online_views; ++i)
      vs.online_views.push_back(sample_clip(video, T, tau, rng));
  }
  return vs;
}

namespace {
constexpr char kDatasetMagic[8] = {'V', 'D', 'S', 'T', 'D', 'A', 'T', 'A'};
constexpr uint8_t kDatasetVersion = 1;
}  // namespace

void save_dataset(const std::vector<VideoRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  out.write(kDatasetMagic, 8);
  out.put(static_cast<char>(kDatasetVersion));

  json manifest = json::array();
  for (const auto& r : records) {
    manifest.push_back({{"id", r.id},
                        {"label", r.label ? json(*r.label) : json(nullptr)},
                        {"split", r.split == Split::train ? "train" : "val"},
                        {"shape", {r.num_frames, r.height, r.width, 3}}});
  }
  std::string m = manifest.dump();
  uint64_t mlen = m.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const auto& r : records)
    out.write(reinterpret_cast<const char*>(r.frames.data()),
              static_cast<std::streamsize>(r.frames.size()));
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

std::vector<VideoRecord> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kDatasetMagic, 8) != 0)
    throw std::runtime_error("load_dataset: bad magic in " + path);
  int version = in.get();
  if (version != kDatasetVersion)
    throw std::runtime_error("load_dataset: unsupported version " + std::to_string(version));
  uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  std::string m(mlen, '\0');
  in.read(m.data(), static_cast<std::streamsize>(mlen));
  json manifest = json::parse(m);

  std::vector<VideoRecord> records;
  records.reserve(manifest.size());
  for (const auto& e : manifest) {
    VideoRecord r;
    r.id = e.at("id").get<std::string>();
    if (!e.at("label").is_null()) r.label = e.at("label").get<int64_t>();
    r.split = e.at("split").get<std::string>() == "train" ? Split::train : Split::val;
    auto shape = e.at("shape");
    r.num_frames = shape.at(0).get<int64_t>();
    r.height = shape.at(1).get<int64_t>();
    r.width = shape.at(2).get<int64_t>();
    r.frames.resize(static_cast<size_t>(r.num_frames * r.frame_bytes()));
    in.read(reinterpret_cast<char*>(r.frames.data()),
            static_cast<std::streamsize>(r.frames.size()));
    records.push_back(std::move(r));
  }
  if (!in) throw std::runtime_error("load_dataset: truncated file " + path);
  return records;
}

}  // namespace vidistill
