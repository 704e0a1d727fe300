// SPDX-License-Identifier: Apache-2.0
#include "vidistill/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "vidistill/metrics.hpp"
#include "vidistill/objective.hpp"

namespace vidistill {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<VideoRecord> build_dataset(const RunConfig& cfg) {
  if (!cfg.dataset.path.empty() && fs::exists(cfg.dataset.path)) return load_dataset(cfg.dataset.path);
  const int64_t per_class = cfg.dataset.train_videos_per_class + cfg.dataset.val_videos_per_class;
  auto records = make_synthetic_dataset(cfg.dataset.num_classes, per_class,
                                        cfg.dataset.raw_frames, cfg.dataset.spatial_size,
                                        cfg.seed);
  for (int64_t c = 0; c < cfg.dataset.num_classes; ++c)
    for (int64_t v = 0; v < per_class; ++v)
      records[static_cast<size_t>(c * per_class + v)].split =
          v < cfg.dataset.train_videos_per_class ? Split::train : Split::val;
  return records;
}

std::vector<std::unique_ptr<TargetAdapter>> build_targets(const RunConfig& cfg) {
  std::vector<std::unique_ptr<TargetAdapter>> out;
  for (const auto& t : cfg.targets) {
    if (t.kind == "random_projection") {
      out.push_back(std::make_unique<RandomProjectionAdapter>(t.name, t.output_dim, t.seed));
    } else if (t.kind == "oracle") {
      out.push_back(std::make_unique<OracleAdapter>(t.name, cfg.dataset.num_classes,
                                                    t.output_dim, t.seed, t.oracle_noise));
    } else if (t.kind == "feature_file") {
      out.push_back(std::make_unique<FeatureFileAdapter>(t.name, t.path));
    } else {
      throw std::invalid_argument("build_targets: unknown kind '" + t.kind + "'");
    }
  }
  return out;
}

std::unique_ptr<OnlineNetwork> build_network(const RunConfig& cfg) {
  std::vector<std::pair<std::string, int64_t>> dims;
  for (const auto& t : cfg.targets) {
    if (t.name == kAuxHeadName)
      throw std::invalid_argument("build_network: target name '" + t.name + "' is reserved");
    dims.emplace_back(t.name, t.output_dim);
  }
  if (cfg.loss.aux_ssl) dims.emplace_back(kAuxHeadName, cfg.encoder.projector_dim);
  return std::make_unique<OnlineNetwork>(cfg.encoder, dims, cfg.seed);
}

EvalGeometry eval_geometry(const RunConfig& cfg) {
  EvalGeometry g;
  g.clip_frames = cfg.encoder.clip_frames;
  g.clip_stride = cfg.encoder.clip_stride;
  g.crop_size = cfg.augment.crop_size;
  g.resize_short = cfg.eval.resize_short;
  return g;
}

void restore_network(OnlineNetwork& net, const std::map<std::string, Tensor>& tensors) {
  auto apply = [&](const std::string& name, Tensor* dst) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw std::runtime_error("restore_network: checkpoint missing tensor '" + name + "'");
    if (!dst->same_shape(it->second))
      throw std::runtime_error("restore_network: shape mismatch for '" + name + "'");
    *dst = it->second;
  };
  for (auto& p : net.parameters()) apply(p.name, p.value);
  for (auto& s : net.state()) apply(s.name, s.value);
}

namespace {

std::map<std::string, Tensor> snapshot_network(OnlineNetwork& net) {
  std::map<std::string, Tensor> out;
  for (auto& p : net.parameters()) out.emplace(p.name, *p.value);
  for (auto& s : net.state()) out.emplace(s.name, *s.value);
  return out;
}

std::map<std::string, Tensor> snapshot_momentum(MomentumState& mom) {
  std::map<std::string, Tensor> out;
  for (auto& s : mom.tensors()) out.emplace(s.name, *s.value);
  return out;
}

void restore_momentum(MomentumState& mom, const std::map<std::string, Tensor>& tensors) {
  for (auto& s : mom.tensors()) {
    auto it = tensors.find(s.name);
    if (it == tensors.end())
      throw std::runtime_error("restore: checkpoint missing EMA tensor '" + s.name + "'");
    *s.value = it->second;
  }
}

Tensor stack_clips(const std::vector<Clip>& clips) {
  const int64_t B = static_cast<int64_t>(clips.size());
  const auto& s = clips.front().frames.shape();
  Tensor batch({B, s[0], s[1], s[2], s[3]});
  const int64_t elems = clips.front().frames.numel();
  for (int64_t b = 0; b < B; ++b)
    std::copy(clips[static_cast<size_t>(b)].frames.data(),
              clips[static_cast<size_t>(b)].frames.data() + elems, batch.data() + b * elems);
  return batch;
}

Tensor slice_sample(const Tensor& batch, int64_t b) {
  // [B, T, D] -> [T, D]
  const int64_t T = batch.dim(1), D = batch.dim(2);
  return Tensor({T, D}, std::vector<double>(batch.data() + b * T * D,
                                            batch.data() + (b + 1) * T * D));
}

std::string checkpoint_name(int64_t epoch) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "checkpoint_epoch_%04lld.bin", static_cast<long long>(epoch));
  return buf;
}

}  // namespace

PretrainResult run_pretrain(const RunConfig& cfg, const std::string& resume_checkpoint) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  save_config(cfg, cfg.out_dir + "/config.json");

  auto records = build_dataset(cfg);
  std::vector<size_t> train_idx;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].split == Split::train) train_idx.push_back(i);
  const int64_t B = cfg.optim.batch_size;
  const int64_t steps_per_epoch = static_cast<int64_t>(train_idx.size()) / B;
  if (steps_per_epoch < 1)
    throw std::invalid_argument("run_pretrain: fewer training videos than one batch");
  const int64_t total_steps = cfg.optim.total_epochs * steps_per_epoch;

  auto adapters = build_targets(cfg);
  auto net = build_network(cfg);
  std::unique_ptr<MomentumState> momentum;
  if (cfg.loss.aux_ssl) {
    momentum = std::make_unique<MomentumState>(cfg.encoder, cfg.seed);
    momentum->copy_from(*net);
  }
  std::map<std::string, Tensor> opt_state;

  int64_t start_step = 0;
  if (!resume_checkpoint.empty()) {
    Checkpoint ckpt = load_checkpoint(resume_checkpoint);
    json mine = to_json(cfg), theirs = ckpt.config;
    mine.erase("out_dir");
    theirs.erase("out_dir");
    if (mine != theirs)
      throw std::runtime_error("run_pretrain: resume config differs from checkpoint config");
    restore_network(*net, ckpt.online);
    if (momentum) restore_momentum(*momentum, ckpt.momentum);
    opt_state = ckpt.optimizer;
    start_step = ckpt.step;
  }

  const std::string metrics_path = cfg.out_dir + "/metrics.jsonl";
  if (start_step > 0 && fs::exists(metrics_path)) {
    // Drop records past the checkpoint so the resumed run appends cleanly.
    auto existing = MetricsLog::read(metrics_path);
    std::ofstream rewrite(metrics_path, std::ios::trunc);
    for (const auto& rec : existing)
      if (!rec.contains("step") || rec["step"].get<int64_t>() < start_step)
        rewrite << rec.dump() << "\n";
  }
  MetricsLog metrics(metrics_path, /*append=*/start_step > 0);
  if (start_step == 0)
    metrics.append({{"type", "meta"},
                    {"seed", cfg.seed},
                    {"steps_per_epoch", steps_per_epoch},
                    {"config", to_json(cfg)}});

  const int64_t T = cfg.encoder.clip_frames;
  const int64_t tau = cfg.encoder.clip_stride;
  const int64_t V = std::max<int64_t>(1, cfg.dataset.num_online_views);
  const auto t_begin = std::chrono::steady_clock::now();

  double last_loss = 0.0;
  std::string last_ckpt_path;
  for (int64_t epoch = 0; epoch < cfg.optim.total_epochs; ++epoch) {
    if ((epoch + 1) * steps_per_epoch <= start_step) continue;  // fully completed before resume

    std::vector<size_t> order = train_idx;
    SeedStream shuffle_rng = SeedStream::from_key({cfg.seed, 0x73687566ull,
                                                   static_cast<uint64_t>(epoch)});
    for (size_t i = order.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i)));
      std::swap(order[i], order[j]);
    }

    for (int64_t b = 0; b < steps_per_epoch; ++b) {
      const int64_t step = epoch * steps_per_epoch + b;
      if (step < start_step) continue;

      // Assemble the batch: independently sampled temporal views, one
      // augmentation draw per clip per consumer.
      std::vector<Clip> ref_clips;
      std::vector<std::vector<Clip>> online_clips(static_cast<size_t>(V));
      for (int64_t i = 0; i < B; ++i) {
        const auto& video = records[order[static_cast<size_t>(b * B + i)]];
        SeedStream view_rng = SeedStream::from_key(
            {cfg.seed, 0x76696577ull, static_cast<uint64_t>(epoch), static_cast<uint64_t>(b),
             static_cast<uint64_t>(i)});
        ViewSet vs = sample_views(video, cfg.dataset.num_online_views, T, tau, view_rng,
                                  cfg.dataset.anchored_ref);
        SeedStream ref_aug_rng = SeedStream::from_key(
            {cfg.seed, 0x61756700ull, static_cast<uint64_t>(epoch), static_cast<uint64_t>(b),
             static_cast<uint64_t>(i), 0});
        AugParams ref_params =
            draw_aug_params(cfg.augment, video.height, video.width, ref_aug_rng);
        ref_clips.push_back(apply_aug(vs.v_ref, ref_params));
        for (int64_t v = 0; v < V; ++v) {
          SeedStream aug_rng = SeedStream::from_key(
              {cfg.seed, 0x61756700ull, static_cast<uint64_t>(epoch), static_cast<uint64_t>(b),
               static_cast<uint64_t>(i), static_cast<uint64_t>(v + 1)});
          AugParams params = draw_aug_params(cfg.augment, video.height, video.width, aug_rng);
          online_clips[static_cast<size_t>(v)].push_back(
              apply_aug(vs.online_views[static_cast<size_t>(v)], params));
        }
      }

      // Frozen target features of the reference view.
      std::map<std::string, Tensor> k_batch;  // per target: [B, T, D]
      for (const auto& adapter : adapters) {
        Tensor k({B, T, adapter->output_dim()});
        for (int64_t i = 0; i < B; ++i) {
          Tensor ki = adapter->encode(ref_clips[static_cast<size_t>(i)]);
          std::copy(ki.data(), ki.data() + ki.numel(), k.data() + i * ki.numel());
        }
        k_batch.emplace(adapter->name(), std::move(k));
      }
      Tensor k_momentum;
      if (momentum) k_momentum = momentum->forward(stack_clips(ref_clips), /*training=*/true);

      // Forward/backward one view at a time; the loss is additive over views
      // (the targets are fixed), so per-view backward is exact.
      net->zero_grad();
      double loss_total = 0.0;
      double aux_total = 0.0;
      std::map<std::string, double> per_target_total;
      const double inv_bv = 1.0 / static_cast<double>(B * V);
      for (int64_t v = 0; v < V; ++v) {
        OnlineOutputs out = net->forward(stack_clips(online_clips[static_cast<size_t>(v)]),
                                         /*training=*/true);
        std::map<std::string, Tensor> dq;
        for (const auto& adapter : adapters)
          dq.emplace(adapter->name(),
                     Tensor({B, T, adapter->output_dim()}));
        if (momentum) dq.emplace(kAuxHeadName, Tensor({B, T, cfg.encoder.projector_dim}));

        for (int64_t i = 0; i < B; ++i) {
          std::map<std::string, std::vector<Tensor>> q_sets;
          std::map<std::string, Tensor> k_set;
          for (const auto& adapter : adapters) {
            q_sets[adapter->name()] = {slice_sample(out.predictions.at(adapter->name()), i)};
            k_set[adapter->name()] = slice_sample(k_batch.at(adapter->name()), i);
          }
          EnsembleResult er = ensemble_loss(q_sets, k_set, cfg.loss);
          loss_total += er.value * inv_bv;
          for (const auto& [name, value] : er.per_target)
            per_target_total[name] += value * inv_bv;
          for (auto& [name, grads] : er.grad_q) {
            Tensor& dst = dq.at(name);
            const Tensor& g = grads.front();
            for (int64_t e = 0; e < g.numel(); ++e) dst[i * g.numel() + e] += g[e] * inv_bv;
          }
          if (momentum) {
            LossResult ar = aux_ssl_loss({slice_sample(out.predictions.at(kAuxHeadName), i)},
                                         slice_sample(k_momentum, i), cfg.loss);
            aux_total += ar.value * inv_bv;
            Tensor& dst = dq.at(kAuxHeadName);
            const Tensor& g = ar.grad_q.front();
            const double w = cfg.loss.aux_weight * inv_bv;
            for (int64_t e = 0; e < g.numel(); ++e) dst[i * g.numel() + e] += g[e] * w;
          }
        }
        net->backward(dq);
      }
      double objective = loss_total + cfg.loss.aux_weight * aux_total;
      if (!std::isfinite(objective))
        throw std::runtime_error(
            "run_pretrain: non-finite loss at step " + std::to_string(step) + " (epoch " +
            std::to_string(epoch) + ", batch " + std::to_string(b) + ", seed " +
            std::to_string(cfg.seed) + ")");

      double lr = lr_at(step, steps_per_epoch, cfg.optim);
      auto params = net->parameters();
      lars_step(params, opt_state, lr, cfg.optim);
      if (momentum) momentum->ema_update_from(*net, cfg.ema_momentum);
      net->step = step + 1;
      last_loss = objective;

      json rec{{"type", "train"},
               {"step", step},
               {"epoch", epoch},
               {"lr", lr},
               {"loss_total", objective},
               {"loss_distill", loss_total},
               {"wall_s", std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                        t_begin)
                              .count()}};
      json per_target = json::object();
      for (const auto& [name, value] : per_target_total) per_target[name] = value;
      rec["loss_per_target"] = per_target;
      if (momentum) rec["aux_loss"] = aux_total;
      metrics.append(rec);
    }

    const bool last_epoch = epoch + 1 == cfg.optim.total_epochs;
    if ((epoch + 1) % cfg.checkpoint_interval_epochs == 0 || last_epoch) {
      Checkpoint ckpt;
      ckpt.config = to_json(cfg);
      ckpt.step = (epoch + 1) * steps_per_epoch;
      ckpt.online = snapshot_network(*net);
      if (momentum) ckpt.momentum = snapshot_momentum(*momentum);
      ckpt.optimizer = opt_state;
      last_ckpt_path = cfg.out_dir + "/" + checkpoint_name(epoch + 1);
      save_checkpoint(ckpt, last_ckpt_path);
    }
  }

  PretrainResult res;
  res.checkpoint_path = last_ckpt_path;
  res.metrics_path = metrics.path();
  res.final_loss = last_loss;
  res.steps = total_steps;
  return res;
}

namespace {

EvalReport knn_report(OnlineNetwork& net, const std::vector<VideoRecord>& train,
                      const std::vector<VideoRecord>& val, const RunConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  EvalGeometry geom = eval_geometry(cfg);
  FeatureBank bank_train =
      extract_features(net, train, geom, cfg.eval.bank_clips, cfg.eval.bank_crops);
  FeatureBank bank_val =
      extract_features(net, val, geom, cfg.eval.bank_clips, cfg.eval.bank_crops);
  const int64_t num_classes = cfg.dataset.num_classes;
  std::vector<int64_t> correct(static_cast<size_t>(num_classes), 0);
  std::vector<int64_t> total(static_cast<size_t>(num_classes), 0);
  int64_t hits = 0;
  for (int64_t n = 0; n < bank_val.size(); ++n) {
    Tensor query({bank_val.dim()},
                 std::vector<double>(bank_val.features.data() + n * bank_val.dim(),
                                     bank_val.features.data() + (n + 1) * bank_val.dim()));
    auto [pred, scores] = knn_classify(bank_train, query, cfg.eval.knn_k,
                                       cfg.eval.knn_temperature);
    int64_t label = bank_val.labels[static_cast<size_t>(n)];
    ++total[static_cast<size_t>(label)];
    if (pred == label) {
      ++hits;
      ++correct[static_cast<size_t>(label)];
    }
  }
  EvalReport rep;
  rep.protocol = "knn";
  rep.top1 = static_cast<double>(hits) / static_cast<double>(bank_val.size());
  for (int64_t c = 0; c < num_classes; ++c)
    rep.per_class.push_back(total[static_cast<size_t>(c)] == 0
                                ? 0.0
                                : static_cast<double>(correct[static_cast<size_t>(c)]) /
                                      static_cast<double>(total[static_cast<size_t>(c)]));
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace

EvalReport run_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                    const std::string& protocol) {
  cfg.validate();
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  auto net = build_network(cfg);
  restore_network(*net, ckpt.online);
  net->step = ckpt.step;

  auto records = build_dataset(cfg);
  std::vector<VideoRecord> train, val;
  for (auto& r : records)
    (r.split == Split::train ? train : val).push_back(r);
  if (val.empty()) throw std::invalid_argument("run_eval: validation split is empty");

  EvalGeometry geom = eval_geometry(cfg);
  const int64_t num_classes = cfg.dataset.num_classes;
  EvalReport rep;
  if (protocol == "knn") {
    rep = knn_report(*net, train, val, cfg);
  } else if (protocol == "linear") {
    rep = linear_probe(*net, train, val, num_classes, geom, ProbeConfig{cfg.eval.probe.epochs,
                                                                        cfg.eval.probe.warmup_epochs,
                                                                        cfg.eval.probe.base_lr,
                                                                        cfg.eval.probe.batch_size,
                                                                        cfg.eval.probe.momentum},
                       cfg.eval.clips, cfg.eval.crops, cfg.seed);
  } else if (protocol == "finetune") {
    rep = finetune(*net, train, val, num_classes, geom,
                   FinetuneConfig{cfg.eval.finetune.epochs, cfg.eval.finetune.warmup_epochs,
                                  cfg.eval.finetune.base_lr, cfg.eval.finetune.batch_size,
                                  cfg.eval.finetune.momentum},
                   cfg.eval.clips, cfg.eval.crops, cfg.seed);
  } else if (protocol == "semi") {
    auto idx = semi_split(train, cfg.eval.semi_fraction, cfg.seed);
    std::vector<VideoRecord> subset;
    for (size_t i : idx) subset.push_back(train[i]);
    rep = finetune(*net, subset, val, num_classes, geom,
                   FinetuneConfig{cfg.eval.finetune.epochs, cfg.eval.finetune.warmup_epochs,
                                  cfg.eval.semi_lr, cfg.eval.finetune.batch_size,
                                  cfg.eval.finetune.momentum},
                   cfg.eval.clips, cfg.eval.crops, cfg.seed);
    rep.protocol = "semi";
  } else if (protocol == "multiview") {
    rep = linear_probe(*net, train, val, num_classes, geom,
                       ProbeConfig{cfg.eval.probe.epochs, cfg.eval.probe.warmup_epochs,
                                   cfg.eval.probe.base_lr, cfg.eval.probe.batch_size,
                                   cfg.eval.probe.momentum},
                       /*eval_clips=*/10, /*eval_crops=*/3, cfg.seed);
    rep.protocol = "multiview";
  } else {
    throw std::invalid_argument("run_eval: unknown protocol '" + protocol + "'");
  }
  rep.config_snapshot = to_json(cfg).dump();

  fs::create_directories(cfg.out_dir);
  const int64_t steps_per_epoch =
      std::max<int64_t>(1, (cfg.dataset.num_classes * cfg.dataset.train_videos_per_class) /
                               cfg.optim.batch_size);
  MetricsLog metrics(cfg.out_dir + "/metrics.jsonl", /*append=*/true);
  metrics.append({{"type", "eval"},
                  {"protocol", rep.protocol},
                  {"checkpoint", checkpoint_path},
                  {"checkpoint_step", ckpt.step},
                  {"epoch", ckpt.step / steps_per_epoch},
                  {"top1", rep.top1},
                  {"per_class", rep.per_class},
                  {"wall_s", rep.wall_seconds}});
  return rep;
}

}  // namespace vidistill
