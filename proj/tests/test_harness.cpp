// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vidistill/metrics.hpp"
#include "vidistill/plots.hpp"
#include "vidistill/trainer.hpp"

using namespace vidistill;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run_config(const std::string& out_dir) {
  RunConfig cfg;
  cfg.seed = 2024;
  cfg.out_dir = out_dir;
  cfg.dataset.num_classes = 2;
  cfg.dataset.train_videos_per_class = 10;
  cfg.dataset.val_videos_per_class = 3;
  cfg.dataset.raw_frames = 16;
  cfg.dataset.spatial_size = 16;
  cfg.dataset.num_online_views = 2;
  cfg.augment.resize_short_lo = 16;
  cfg.augment.resize_short_hi = 18;
  cfg.augment.crop_size = 12;
  cfg.encoder.channels = {4, 8};
  cfg.encoder.spatial_strides = {2, 1};
  cfg.encoder.projector_hidden = 8;
  cfg.encoder.projector_dim = 6;
  cfg.encoder.predictor_hidden = 8;
  cfg.encoder.clip_frames = 4;
  cfg.encoder.clip_stride = 2;
  cfg.targets = {TargetConfig{"proj", "random_projection", 8, 5, 0.1, ""}};
  cfg.loss.targets = {"proj"};
  cfg.optim.batch_size = 4;
  cfg.optim.warmup_epochs = 1;
  cfg.optim.total_epochs = 2;
  cfg.eval.knn_k = 3;
  cfg.eval.resize_short = 14;
  cfg.eval.probe.epochs = 2;
  cfg.eval.finetune.epochs = 1;
  return cfg;
}

std::string temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("vidistill_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("config defaults survive a JSON round trip") {
  RunConfig cfg;
  nlohmann::json j = to_json(cfg);
  RunConfig back = config_from_json(j);
  CHECK(to_json(back) == j);
}

TEST_CASE("set overrides reach nested keys and reject unknown ones") {
  RunConfig cfg;
  nlohmann::json tree = to_json(cfg);
  apply_set_override(tree, "optim.batch_size=8");
  apply_set_override(tree, "loss.temporal_pool=false");
  apply_set_override(tree, "targets.0.output_dim=16");
  apply_set_override(tree, "out_dir=runs/override");
  RunConfig back = config_from_json(tree);
  CHECK(back.optim.batch_size == 8);
  CHECK_FALSE(back.loss.temporal_pool);
  CHECK(back.targets[0].output_dim == 16);
  CHECK(back.out_dir == "runs/override");

  CHECK_THROWS_AS(apply_set_override(tree, "optim.no_such_key=1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_set_override(tree, "nonsense"), std::invalid_argument);
}

TEST_CASE("config validation catches cross-field inconsistencies") {
  RunConfig cfg = tiny_run_config("unused");
  cfg.encoder.clip_frames = 16;  // span 31 > 16 raw frames
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = tiny_run_config("unused");
  cfg.dataset.num_online_views = 3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = tiny_run_config("unused");
  cfg.loss.aux_weight = 0.5;  // without aux_ssl
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = tiny_run_config("unused");
  cfg.targets.clear();
  cfg.loss.targets.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("unknown config keys are rejected on load") {
  nlohmann::json j = to_json(RunConfig{});
  j["tyopo"] = 1;
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
}

TEST_CASE("metrics log enforces strictly increasing steps") {
  std::string dir = temp_dir("metrics");
  MetricsLog log(dir + "/m.jsonl", false);
  log.append({{"type", "train"}, {"step", 0}, {"loss_total", 1.0}});
  log.append({{"type", "train"}, {"step", 1}, {"loss_total", 0.9}});
  CHECK_THROWS_AS(log.append({{"type", "train"}, {"step", 1}, {"loss_total", 0.8}}),
                  std::invalid_argument);
  auto records = MetricsLog::read(dir + "/m.jsonl");
  CHECK(records.size() == 2);
}

TEST_CASE("two-epoch pretraining writes checkpoints and a consistent log") {
  std::string dir = temp_dir("pretrain");
  RunConfig cfg = tiny_run_config(dir);
  PretrainResult res = run_pretrain(cfg);

  CHECK(fs::exists(dir + "/config.json"));
  int checkpoints = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename().string().rfind("checkpoint_", 0) == 0) ++checkpoints;
  CHECK(checkpoints >= 2);

  // The echoed config equals the input config field for field.
  Checkpoint ckpt = load_checkpoint(res.checkpoint_path);
  CHECK(ckpt.config == to_json(cfg));
  CHECK(ckpt.step == res.steps);

  // The logged lr column is exactly lr_at(step).
  const int64_t spe = (cfg.dataset.num_classes * cfg.dataset.train_videos_per_class) /
                      cfg.optim.batch_size;
  int64_t train_records = 0;
  for (const auto& rec : MetricsLog::read(res.metrics_path)) {
    if (rec.value("type", "") != "train") continue;
    ++train_records;
    int64_t step = rec.at("step").get<int64_t>();
    CHECK(rec.at("lr").get<double>() == lr_at(step, spe, cfg.optim));
    CHECK(std::isfinite(rec.at("loss_total").get<double>()));
    CHECK(rec.at("loss_per_target").contains("proj"));
  }
  CHECK(train_records == res.steps);
  fs::remove_all(dir);
}

TEST_CASE("resuming reproduces the uninterrupted run") {
  std::string dir_a = temp_dir("resume_a");
  RunConfig cfg_a = tiny_run_config(dir_a);
  PretrainResult full = run_pretrain(cfg_a);

  std::vector<double> full_losses;
  for (const auto& rec : MetricsLog::read(full.metrics_path))
    if (rec.value("type", "") == "train") full_losses.push_back(rec.at("loss_total").get<double>());

  // Restart from the epoch-1 checkpoint in a fresh directory.
  std::string dir_b = temp_dir("resume_b");
  RunConfig cfg_b = tiny_run_config(dir_b);
  PretrainResult resumed = run_pretrain(cfg_b, dir_a + "/checkpoint_epoch_0001.bin");

  std::vector<double> resumed_losses;
  int64_t first_step = -1;
  for (const auto& rec : MetricsLog::read(resumed.metrics_path))
    if (rec.value("type", "") == "train") {
      if (first_step < 0) first_step = rec.at("step").get<int64_t>();
      resumed_losses.push_back(rec.at("loss_total").get<double>());
    }
  const int64_t spe = 5;
  REQUIRE(first_step == spe);  // resumes right after epoch 1
  REQUIRE(resumed_losses.size() == full_losses.size() - static_cast<size_t>(spe));
  // Next-step loss agrees with the uninterrupted run.
  CHECK(std::fabs(resumed_losses[0] - full_losses[static_cast<size_t>(spe)]) < 1e-6);
  // And in fact the whole tail matches bit-exactly.
  for (size_t i = 0; i < resumed_losses.size(); ++i)
    CHECK(resumed_losses[i] == full_losses[static_cast<size_t>(spe) + i]);

  // The final checkpoints agree tensor for tensor.
  Checkpoint ca = load_checkpoint(full.checkpoint_path);
  Checkpoint cb = load_checkpoint(resumed.checkpoint_path);
  REQUIRE(ca.online.size() == cb.online.size());
  for (const auto& [name, t] : ca.online) CHECK(t.raw() == cb.online.at(name).raw());

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("resume rejects a mismatched configuration") {
  std::string dir = temp_dir("resume_conflict");
  RunConfig cfg = tiny_run_config(dir);
  PretrainResult res = run_pretrain(cfg);
  RunConfig other = cfg;
  other.optim.base_lr_coefficient = 1.0;
  CHECK_THROWS_AS(run_pretrain(other, res.checkpoint_path), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("evaluation protocols run and repeat deterministically") {
  std::string dir = temp_dir("eval");
  RunConfig cfg = tiny_run_config(dir);
  PretrainResult res = run_pretrain(cfg);

  EvalReport knn1 = run_eval(cfg, res.checkpoint_path, "knn");
  EvalReport knn2 = run_eval(cfg, res.checkpoint_path, "knn");
  CHECK(knn1.top1 == knn2.top1);
  CHECK(knn1.per_class == knn2.per_class);
  CHECK(knn1.top1 >= 0.0);
  CHECK(knn1.top1 <= 1.0);

  EvalReport lin = run_eval(cfg, res.checkpoint_path, "linear");
  CHECK(lin.protocol == "linear");

  CHECK_THROWS_AS(run_eval(cfg, res.checkpoint_path, "nope"), std::invalid_argument);

  // Fraction 1.0 with matching settings makes semi identical to finetune.
  RunConfig semi_cfg = cfg;
  semi_cfg.eval.semi_fraction = 1.0;
  semi_cfg.eval.semi_lr = semi_cfg.eval.finetune.base_lr;
  EvalReport semi = run_eval(semi_cfg, res.checkpoint_path, "semi");
  EvalReport ft = run_eval(cfg, res.checkpoint_path, "finetune");
  CHECK(semi.top1 == ft.top1);
  CHECK(semi.per_class == ft.per_class);

  fs::remove_all(dir);
}

TEST_CASE("plots are emitted from the metrics log") {
  std::string dir = temp_dir("plots");
  RunConfig cfg = tiny_run_config(dir);
  PretrainResult res = run_pretrain(cfg);
  run_eval(cfg, res.checkpoint_path, "knn");

  std::string plot_dir = dir + "/plots";
  auto files = emit_plots(res.metrics_path, plot_dir);
  CHECK(files.size() == 3);
  CHECK(fs::exists(plot_dir + "/loss_vs_step.svg"));
  CHECK(fs::exists(plot_dir + "/lr_vs_step.svg"));
  CHECK(fs::exists(plot_dir + "/eval_accuracy_vs_epoch.svg"));
  // Labeled axes present in the output.
  std::ifstream in(plot_dir + "/loss_vs_step.svg");
  std::string svg((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(svg.find("step") != std::string::npos);
  CHECK(svg.find("loss") != std::string::npos);

  // An empty log errors and writes nothing.
  std::string empty_path = dir + "/empty.jsonl";
  std::ofstream(empty_path).close();
  std::string empty_dir = dir + "/plots_empty";
  CHECK_THROWS_AS(emit_plots(empty_path, empty_dir), std::invalid_argument);
  CHECK_FALSE(fs::exists(empty_dir + "/loss_vs_step.svg"));

  fs::remove_all(dir);
}

TEST_CASE("auxiliary branch trains and logs its loss") {
  std::string dir = temp_dir("aux");
  RunConfig cfg = tiny_run_config(dir);
  cfg.loss.aux_ssl = true;
  cfg.loss.aux_weight = 0.5;
  cfg.optim.total_epochs = 1;
  PretrainResult res = run_pretrain(cfg);
  bool saw_aux = false;
  for (const auto& rec : MetricsLog::read(res.metrics_path))
    if (rec.value("type", "") == "train") {
      REQUIRE(rec.contains("aux_loss"));
      double aux = rec.at("aux_loss").get<double>();
      CHECK(aux >= 0.0);
      CHECK(aux <= 4.0);
      saw_aux = true;
    }
  CHECK(saw_aux);
  Checkpoint ckpt = load_checkpoint(res.checkpoint_path);
  CHECK_FALSE(ckpt.momentum.empty());
  fs::remove_all(dir);
}
