// SPDX-License-Identifier: Apache-2.0
#include "vidistill/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "vidistill/augment.hpp"
#include "vidistill/optim.hpp"

namespace vidistill {

namespace {

double wall_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

uint64_t parameter_checksum(OnlineNetwork& net) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : net.parameters()) {
    uint64_t ph = fnv1a64(p.value->data(), static_cast<size_t>(p.value->numel()) * sizeof(double));
    h ^= ph;
    h *= 0x100000001b3ull;
  }
  return h;
}

int64_t argmax_lowest(const std::vector<double>& scores) {
  int64_t best = 0;
  for (size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[static_cast<size_t>(best)]) best = static_cast<int64_t>(i);
  return best;
}

Tensor stack_views(const std::vector<Tensor>& views) {
  const int64_t V = static_cast<int64_t>(views.size());
  const auto& s = views.front().shape();
  Tensor batch({V, s[0], s[1], s[2], s[3]});
  const int64_t elems = views.front().numel();
  for (int64_t v = 0; v < V; ++v)
    std::copy(views[static_cast<size_t>(v)].data(), views[static_cast<size_t>(v)].data() + elems,
              batch.data() + v * elems);
  return batch;
}

// Per-view unit features of one video: encode all dense views in one
// evaluation-mode forward, pool over time, normalize each row.
std::vector<Tensor> video_view_features(OnlineNetwork& net, const VideoRecord& video,
                                        const EvalGeometry& geom, int64_t clips, int64_t crops) {
  std::vector<Tensor> views;
  for (int64_t start : dense_clip_starts(video.num_frames, geom.clip_frames, geom.clip_stride,
                                         clips)) {
    Clip clip = clip_at(video, start, geom.clip_frames, geom.clip_stride);
    for (auto& v : eval_views_of_clip(clip, crops, geom)) views.push_back(std::move(v));
  }
  Tensor batch = stack_views(views);
  Tensor feats = net.encoder().forward(batch, /*training=*/false);  // [V, T, C]
  Tensor pooled = nn::temporal_avg_pool_batch(feats);               // [V, C]
  Tensor unit = nn::l2_normalize_rows(pooled);
  std::vector<Tensor> rows;
  rows.reserve(static_cast<size_t>(unit.dim(0)));
  for (int64_t v = 0; v < unit.dim(0); ++v)
    rows.emplace_back(std::vector<int64_t>{unit.dim(1)},
                      std::vector<double>(unit.data() + v * unit.dim(1),
                                          unit.data() + (v + 1) * unit.dim(1)));
  return rows;
}

}  // namespace

double warmup_cosine_lr(int64_t step, int64_t total_steps, int64_t warmup_steps, double base,
                        double min_lr) {
  if (step < 0 || step >= total_steps) throw std::invalid_argument("warmup_cosine_lr: step range");
  if (step < warmup_steps) return base * static_cast<double>(step) / warmup_steps;
  const int64_t last = total_steps - 1;
  if (step == last) return min_lr;
  double p = static_cast<double>(step - warmup_steps) / static_cast<double>(last - warmup_steps);
  return min_lr + (base - min_lr) * 0.5 * (1.0 + std::cos(M_PI * p));
}

// ---------------------------------------------------------------- FeatureBank

int64_t FeatureBank::num_classes() const {
  int64_t mx = -1;
  for (int64_t l : labels) mx = std::max(mx, l);
  return mx + 1;
}

void FeatureBank::validate() const {
  if (size() < 1) throw std::invalid_argument("FeatureBank: empty bank");
  if (static_cast<int64_t>(labels.size()) != size() ||
      static_cast<int64_t>(ids.size()) != size())
    throw std::invalid_argument("FeatureBank: label/id count mismatch");
  for (int64_t n = 0; n < size(); ++n) {
    double s = 0.0;
    for (int64_t d = 0; d < dim(); ++d) s += features.at2(n, d) * features.at2(n, d);
    if (std::fabs(std::sqrt(s) - 1.0) > 1e-6)
      throw std::invalid_argument("FeatureBank: row " + std::to_string(n) + " not unit norm");
    if (labels[static_cast<size_t>(n)] < 0)
      throw std::invalid_argument("FeatureBank: negative label");
  }
}

namespace {
constexpr char kBankMagic[8] = {'V', 'D', 'S', 'T', 'B', 'A', 'N', 'K'};
constexpr uint8_t kBankVersion = 1;
}  // namespace

void FeatureBank::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("FeatureBank::save: cannot open " + path);
  out.write(kBankMagic, 8);
  out.put(static_cast<char>(kBankVersion));
  int64_t n = size(), d = dim();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  out.write(reinterpret_cast<const char*>(features.data()),
            static_cast<std::streamsize>(n * d * sizeof(double)));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(n * sizeof(int64_t)));
  for (const auto& id : ids) {
    uint64_t len = id.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(id.data(), static_cast<std::streamsize>(len));
  }
  if (!out) throw std::runtime_error("FeatureBank::save: write failed for " + path);
}

FeatureBank FeatureBank::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("FeatureBank::load: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kBankMagic, 8) != 0)
    throw std::runtime_error("FeatureBank::load: bad magic in " + path);
  if (in.get() != kBankVersion) throw std::runtime_error("FeatureBank::load: unsupported version");
  int64_t n = 0, d = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&d), sizeof(d));
  FeatureBank bank;
  bank.features = Tensor({n, d});
  in.read(reinterpret_cast<char*>(bank.features.data()),
          static_cast<std::streamsize>(n * d * sizeof(double)));
  bank.labels.resize(static_cast<size_t>(n));
  in.read(reinterpret_cast<char*>(bank.labels.data()),
          static_cast<std::streamsize>(n * sizeof(int64_t)));
  for (int64_t i = 0; i < n; ++i) {
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string id(len, '\0');
    in.read(id.data(), static_cast<std::streamsize>(len));
    bank.ids.push_back(std::move(id));
  }
  if (!in) throw std::runtime_error("FeatureBank::load: truncated file " + path);
  return bank;
}

// ---------------------------------------------------------------- views

std::vector<int64_t> dense_clip_starts(int64_t num_frames, int64_t T, int64_t tau,
                                       int64_t clips) {
  if (clips < 1) throw std::invalid_argument("dense_clip_starts: clips must be >= 1");
  int64_t span = clip_span(T, tau);
  if (num_frames < span)
    throw std::invalid_argument("dense_clip_starts: video shorter than one clip window");
  int64_t max_start = num_frames - span;
  std::vector<int64_t> starts;
  if (clips == 1) {
    starts.push_back(max_start / 2);
    return starts;
  }
  for (int64_t i = 0; i < clips; ++i) {
    double p = static_cast<double>(i) * max_start / static_cast<double>(clips - 1);
    starts.push_back(std::clamp<int64_t>(llround(p), 0, max_start));
  }
  return starts;
}

std::vector<Tensor> eval_views_of_clip(const Clip& clip, int64_t crops,
                                       const EvalGeometry& geom) {
  if (crops != 1 && crops != 3)
    throw std::invalid_argument("eval_views_of_clip: crops must be 1 or 3");
  const int64_t T = clip.t();
  const int64_t h = clip.frames.dim(1), w = clip.frames.dim(2);
  const int64_t c = geom.crop_size;
  const int64_t short_to = (crops == 1) ? geom.resize_short : c;
  int64_t rh = 0, rw = 0;
  resized_dims(h, w, short_to, &rh, &rw);
  if (rh < c || rw < c)
    throw std::invalid_argument("eval_views_of_clip: resized frame smaller than crop");

  std::vector<std::pair<int64_t, int64_t>> boxes;  // (top, left)
  if (crops == 1) {
    boxes.emplace_back((rh - c) / 2, (rw - c) / 2);
  } else {
    // Three crops tiling the longer side: start, center, end.
    if (rw >= rh) {
      boxes.emplace_back(0, 0);
      boxes.emplace_back(0, (rw - c) / 2);
      boxes.emplace_back(0, rw - c);
    } else {
      boxes.emplace_back(0, 0);
      boxes.emplace_back((rh - c) / 2, 0);
      boxes.emplace_back(rh - c, 0);
    }
  }

  const int64_t in_elems = h * w * 3;
  std::vector<Tensor> resized;
  resized.reserve(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) {
    Tensor frame({h, w, 3},
                 std::vector<double>(clip.frames.data() + t * in_elems,
                                     clip.frames.data() + (t + 1) * in_elems));
    resized.push_back(resize_bilinear(frame, rh, rw));
  }

  std::vector<Tensor> views;
  for (auto [top, left] : boxes) {
    Tensor view({T, c, c, 3});
    const int64_t out_elems = c * c * 3;
    for (int64_t t = 0; t < T; ++t) {
      Tensor cropped = crop_frame(resized[static_cast<size_t>(t)], top, left, c);
      std::copy(cropped.data(), cropped.data() + out_elems, view.data() + t * out_elems);
    }
    views.push_back(std::move(view));
  }
  return views;
}

Tensor combine_view_features(const std::vector<Tensor>& unit_rows) {
  if (unit_rows.empty()) throw std::invalid_argument("combine_view_features: no views");
  const int64_t D = unit_rows.front().numel();
  Tensor mean({D});
  for (const auto& r : unit_rows) {
    if (r.numel() != D) throw std::invalid_argument("combine_view_features: dim mismatch");
    for (int64_t d = 0; d < D; ++d) mean[d] += r[d] / static_cast<double>(unit_rows.size());
  }
  double norm = mean.norm();
  if (norm < 1e-9)
    throw std::domain_error("combine_view_features: degenerate (near-zero) average feature");
  for (int64_t d = 0; d < D; ++d) mean[d] /= norm;
  return mean;
}

FeatureBank extract_features(OnlineNetwork& net, const std::vector<VideoRecord>& records,
                             const EvalGeometry& geom, int64_t clips_per_video,
                             int64_t crops_per_clip) {
  if (records.empty()) throw std::invalid_argument("extract_features: empty dataset");
  FeatureBank bank;
  const int64_t D = net.encoder().out_dim();
  bank.features = Tensor({static_cast<int64_t>(records.size()), D});
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    auto rows = video_view_features(net, rec, geom, clips_per_video, crops_per_clip);
    Tensor combined = combine_view_features(rows);
    std::copy(combined.data(), combined.data() + D,
              bank.features.data() + static_cast<int64_t>(i) * D);
    bank.labels.push_back(rec.label.value_or(-1));
    bank.ids.push_back(rec.id);
  }
  bank.validate();
  return bank;
}

// ---------------------------------------------------------------- kNN

std::pair<int64_t, std::vector<double>> knn_classify(const FeatureBank& bank, const Tensor& query,
                                                     int64_t k, double temperature) {
  const int64_t N = bank.size(), D = bank.dim();
  if (k < 1 || k > N)
    throw std::invalid_argument("knn_classify: k must be in [1, " + std::to_string(N) + "]");
  if (temperature <= 0.0) throw std::invalid_argument("knn_classify: temperature must be > 0");
  if (query.numel() != D) throw std::invalid_argument("knn_classify: query dim mismatch");

  std::vector<std::pair<double, int64_t>> sims(static_cast<size_t>(N));
  for (int64_t n = 0; n < N; ++n) {
    double s = 0.0;
    const double* row = bank.features.data() + n * D;
    for (int64_t d = 0; d < D; ++d) s += row[d] * query[d];
    sims[static_cast<size_t>(n)] = {s, n};
  }
  auto cmp = [](const std::pair<double, int64_t>& a, const std::pair<double, int64_t>& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::partial_sort(sims.begin(), sims.begin() + k, sims.end(), cmp);

  std::vector<double> scores(static_cast<size_t>(bank.num_classes()), 0.0);
  for (int64_t i = 0; i < k; ++i) {
    const auto& [sim, idx] = sims[static_cast<size_t>(i)];
    scores[static_cast<size_t>(bank.labels[static_cast<size_t>(idx)])] +=
        std::exp(sim / temperature);
  }
  return {argmax_lowest(scores), scores};
}

double knn_top1(const FeatureBank& bank_train, const FeatureBank& bank_val, int64_t k,
                double temperature) {
  if (bank_train.size() < 1 || bank_val.size() < 1)
    throw std::invalid_argument("knn_top1: empty bank");
  int64_t correct = 0;
  for (int64_t n = 0; n < bank_val.size(); ++n) {
    Tensor query({bank_val.dim()},
                 std::vector<double>(bank_val.features.data() + n * bank_val.dim(),
                                     bank_val.features.data() + (n + 1) * bank_val.dim()));
    auto [pred, scores] = knn_classify(bank_train, query, k, temperature);
    if (pred == bank_val.labels[static_cast<size_t>(n)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(bank_val.size());
}

// ---------------------------------------------------------------- splits

std::vector<size_t> semi_split(const std::vector<VideoRecord>& records, double fraction,
                               uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("semi_split: fraction must be in (0, 1]");
  std::map<int64_t, std::vector<size_t>> by_class;
  for (size_t i = 0; i < records.size(); ++i) {
    if (!records[i].label) throw std::invalid_argument("semi_split: unlabeled record");
    by_class[*records[i].label].push_back(i);
  }
  if (by_class.empty()) throw std::invalid_argument("semi_split: no records");
  std::vector<size_t> selected;
  for (auto& [cls, indices] : by_class) {
    if (indices.empty()) throw std::invalid_argument("semi_split: empty class");
    SeedStream rng = SeedStream::from_key({seed, 0x73706c69ull, static_cast<uint64_t>(cls)});
    for (size_t i = indices.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i)));
      std::swap(indices[i], indices[j]);
    }
    double want = fraction * static_cast<double>(indices.size());
    auto n = static_cast<size_t>(std::max<int64_t>(1, llrint(want)));  // round half to even
    n = std::min(n, indices.size());
    selected.insert(selected.end(), indices.begin(), indices.begin() + static_cast<long>(n));
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

// ---------------------------------------------------------------- probes

nn::Linear train_linear_head(const FeatureBank& bank, int64_t num_classes, const ProbeConfig& cfg,
                             uint64_t seed) {
  bank.validate();
  const int64_t N = bank.size(), D = bank.dim();
  nn::Linear head(D, num_classes);
  SeedStream init_rng = SeedStream::from_key({seed, 0x68656164ull});
  head.init(init_rng);

  const int64_t steps_per_epoch = (N + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = cfg.epochs * steps_per_epoch;
  const int64_t warmup_steps = cfg.warmup_epochs * steps_per_epoch;
  std::map<std::string, Tensor> sgd_state;
  std::vector<nn::ParamRef> params{{"head.weight", &head.weight.value, &head.weight.grad},
                                   {"head.bias", &head.bias.value, &head.bias.grad}};

  int64_t step = 0;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int64_t> order(static_cast<size_t>(N));
    std::iota(order.begin(), order.end(), 0);
    SeedStream shuffle_rng = SeedStream::from_key({seed, 0x70726f62ull,
                                                   static_cast<uint64_t>(epoch)});
    for (size_t i = order.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i)));
      std::swap(order[i], order[j]);
    }
    for (int64_t b = 0; b < steps_per_epoch; ++b, ++step) {
      int64_t lo = b * cfg.batch_size;
      int64_t hi = std::min<int64_t>(lo + cfg.batch_size, N);
      int64_t bs = hi - lo;
      Tensor rows({bs, D});
      std::vector<int64_t> labels(static_cast<size_t>(bs));
      for (int64_t i = 0; i < bs; ++i) {
        int64_t src = order[static_cast<size_t>(lo + i)];
        std::copy(bank.features.data() + src * D, bank.features.data() + (src + 1) * D,
                  rows.data() + i * D);
        labels[static_cast<size_t>(i)] = bank.labels[static_cast<size_t>(src)];
      }
      head.weight.grad.fill(0.0);
      head.bias.grad.fill(0.0);
      Tensor logits = head.forward(rows);
      Tensor dlogits;
      nn::softmax_cross_entropy(logits, labels, &dlogits);
      head.backward(dlogits);
      double lr = warmup_cosine_lr(step, total_steps, warmup_steps, cfg.base_lr);
      sgd_step(params, sgd_state, lr, cfg.momentum);
    }
  }
  return head;
}

std::vector<double> multi_view_predict(OnlineNetwork& net, nn::Linear& head,
                                       const VideoRecord& video, int64_t clips, int64_t crops,
                                       const EvalGeometry& geom) {
  auto rows = video_view_features(net, video, geom, clips, crops);
  const int64_t V = static_cast<int64_t>(rows.size());
  const int64_t D = rows.front().numel();
  Tensor batch({V, D});
  for (int64_t v = 0; v < V; ++v)
    std::copy(rows[static_cast<size_t>(v)].data(), rows[static_cast<size_t>(v)].data() + D,
              batch.data() + v * D);
  Tensor probs = nn::softmax_rows(head.forward(batch));
  std::vector<double> scores(static_cast<size_t>(probs.dim(1)), 0.0);
  for (int64_t v = 0; v < V; ++v)
    for (int64_t k = 0; k < probs.dim(1); ++k)
      scores[static_cast<size_t>(k)] += probs.at2(v, k) / static_cast<double>(V);
  return scores;
}

namespace {

EvalReport report_from_predictions(const std::string& protocol, OnlineNetwork& net,
                                   nn::Linear& head, const std::vector<VideoRecord>& val,
                                   int64_t num_classes, const EvalGeometry& geom,
                                   int64_t eval_clips, int64_t eval_crops,
                                   const std::chrono::steady_clock::time_point& t0) {
  EvalReport rep;
  rep.protocol = protocol;
  std::vector<int64_t> correct(static_cast<size_t>(num_classes), 0);
  std::vector<int64_t> total(static_cast<size_t>(num_classes), 0);
  int64_t hits = 0;
  for (const auto& video : val) {
    auto scores = multi_view_predict(net, head, video, eval_clips, eval_crops, geom);
    int64_t pred = argmax_lowest(scores);
    int64_t label = video.label.value_or(-1);
    if (label < 0 || label >= num_classes)
      throw std::invalid_argument("evaluation: label out of range for video " + video.id);
    ++total[static_cast<size_t>(label)];
    if (pred == label) {
      ++hits;
      ++correct[static_cast<size_t>(label)];
    }
  }
  rep.top1 = val.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(val.size());
  for (int64_t c = 0; c < num_classes; ++c)
    rep.per_class.push_back(total[static_cast<size_t>(c)] == 0
                                ? 0.0
                                : static_cast<double>(correct[static_cast<size_t>(c)]) /
                                      static_cast<double>(total[static_cast<size_t>(c)]));
  rep.wall_seconds = wall_since(t0);
  return rep;
}

}  // namespace

EvalReport linear_probe(OnlineNetwork& net, const std::vector<VideoRecord>& train,
                        const std::vector<VideoRecord>& val, int64_t num_classes,
                        const EvalGeometry& geom, const ProbeConfig& cfg, int64_t eval_clips,
                        int64_t eval_crops, uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  uint64_t before = parameter_checksum(net);
  FeatureBank bank = extract_features(net, train, geom, 1, 1);
  nn::Linear head = train_linear_head(bank, num_classes, cfg, seed);
  EvalReport rep = report_from_predictions("linear", net, head, val, num_classes, geom,
                                           eval_clips, eval_crops, t0);
  if (parameter_checksum(net) != before)
    throw std::runtime_error("linear_probe: encoder parameters changed during probing");
  return rep;
}

EvalReport finetune(OnlineNetwork& net, const std::vector<VideoRecord>& train,
                    const std::vector<VideoRecord>& val, int64_t num_classes,
                    const EvalGeometry& geom, const FinetuneConfig& cfg, int64_t eval_clips,
                    int64_t eval_crops, uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  const int64_t D = net.encoder().out_dim();
  nn::Linear head(D, num_classes);
  SeedStream init_rng = SeedStream::from_key({seed, 0x68656164ull});
  head.init(init_rng);

  const int64_t N = static_cast<int64_t>(train.size());
  if (N > 0 && cfg.epochs > 0) {
    const int64_t steps_per_epoch = (N + cfg.batch_size - 1) / cfg.batch_size;
    const int64_t total_steps = cfg.epochs * steps_per_epoch;
    const int64_t warmup_steps = cfg.warmup_epochs * steps_per_epoch;
    std::map<std::string, Tensor> sgd_state;

    std::vector<nn::ParamRef> params;
    net.encoder().collect_parameters("encoder", params);
    params.push_back({"head.weight", &head.weight.value, &head.weight.grad});
    params.push_back({"head.bias", &head.bias.value, &head.bias.grad});

    int64_t step = 0;
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::vector<int64_t> order(static_cast<size_t>(N));
      std::iota(order.begin(), order.end(), 0);
      SeedStream shuffle_rng = SeedStream::from_key({seed, 0x66746e65ull,
                                                     static_cast<uint64_t>(epoch)});
      for (size_t i = order.size() - 1; i > 0; --i) {
        size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i)));
        std::swap(order[i], order[j]);
      }
      for (int64_t b = 0; b < steps_per_epoch; ++b, ++step) {
        int64_t lo = b * cfg.batch_size;
        int64_t hi = std::min<int64_t>(lo + cfg.batch_size, N);
        int64_t bs = hi - lo;
        std::vector<Tensor> views;
        std::vector<int64_t> labels;
        for (int64_t i = 0; i < bs; ++i) {
          const auto& rec = train[static_cast<size_t>(order[static_cast<size_t>(lo + i)])];
          SeedStream clip_rng = SeedStream::from_key(
              {seed, 0x66746370ull, static_cast<uint64_t>(epoch), static_cast<uint64_t>(b),
               static_cast<uint64_t>(i)});
          Clip clip = sample_clip(rec, geom.clip_frames, geom.clip_stride, clip_rng);
          views.push_back(std::move(eval_views_of_clip(clip, 1, geom).front()));
          labels.push_back(rec.label.value());
        }
        Tensor batch = stack_views(views);
        for (auto& p : params) p.grad->fill(0.0);
        Tensor feats = net.encoder().forward(batch, /*training=*/true);  // [bs, T, C]
        Tensor pooled = nn::temporal_avg_pool_batch(feats);
        Tensor unit = nn::l2_normalize_rows(pooled);
        Tensor logits = head.forward(unit);
        Tensor dlogits;
        nn::softmax_cross_entropy(logits, labels, &dlogits);
        Tensor dunit = head.backward(dlogits);
        Tensor dpooled = nn::l2_normalize_rows_backward(dunit, pooled);
        Tensor dfeats = nn::temporal_avg_pool_batch_backward(dpooled, feats.dim(1));
        net.encoder().backward(dfeats);
        double lr = warmup_cosine_lr(step, total_steps, warmup_steps, cfg.base_lr);
        sgd_step(params, sgd_state, lr, cfg.momentum);
      }
    }
  }
  return report_from_predictions("finetune", net, head, val, num_classes, geom, eval_clips,
                                 eval_crops, t0);
}

}  // namespace vidistill
