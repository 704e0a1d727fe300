// SPDX-License-Identifier: Apache-2.0
//
// vidistill command line: pretrain a video encoder against frozen per-frame
// targets on the synthetic corpus, evaluate checkpoints, render plots.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vidistill/plots.hpp"
#include "vidistill/trainer.hpp"

namespace {

vidistill::RunConfig load_with_overrides(const std::string& config_path,
                                         const std::vector<std::string>& overrides) {
  nlohmann::json tree;
  if (config_path.empty()) {
    tree = vidistill::to_json(vidistill::RunConfig{});
  } else {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config " + config_path);
    tree = nlohmann::json::parse(in);
    // Fill unspecified fields with defaults so --set can reach every key.
    nlohmann::json full = vidistill::to_json(vidistill::config_from_json(tree));
    tree = full;
  }
  for (const auto& o : overrides) vidistill::apply_set_override(tree, o);
  return vidistill::config_from_json(tree);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised video pretraining against frozen image targets"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, protocol, resume_path;
  std::string log_path, plot_out_dir;
  std::vector<std::string> overrides;

  auto* pretrain = app.add_subcommand("pretrain", "Run the pretraining loop");
  pretrain->add_option("--config", config_path, "Run configuration (JSON)");
  pretrain->add_option("--set", overrides, "Override config values: key.path=value");
  pretrain->add_option("--resume", resume_path, "Resume from a checkpoint");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--config", config_path, "Run configuration (JSON)");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval->add_option("--protocol", protocol, "knn|linear|finetune|semi|multiview")->required();
  eval->add_option("--set", overrides, "Override config values: key.path=value");

  auto* plots = app.add_subcommand("plots", "Render plots from a metrics log");
  plots->add_option("--log", log_path, "Metrics log (JSON lines)")->required();
  plots->add_option("--out", plot_out_dir, "Output directory")->required();

  auto* make_data = app.add_subcommand("make-data", "Generate and save the synthetic dataset");
  make_data->add_option("--config", config_path, "Run configuration (JSON)");
  make_data->add_option("--set", overrides, "Override config values: key.path=value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pretrain->parsed()) {
      auto cfg = load_with_overrides(config_path, overrides);
      auto res = vidistill::run_pretrain(cfg, resume_path);
      std::cout << "checkpoint: " << res.checkpoint_path << "\n"
                << "metrics:    " << res.metrics_path << "\n"
                << "final loss: " << res.final_loss << "\n";
    } else if (eval->parsed()) {
      auto cfg = load_with_overrides(config_path, overrides);
      auto rep = vidistill::run_eval(cfg, checkpoint_path, protocol);
      std::cout << rep.protocol << " top-1: " << rep.top1 << "\n";
      for (size_t c = 0; c < rep.per_class.size(); ++c)
        std::cout << "  class " << c << ": " << rep.per_class[c] << "\n";
    } else if (plots->parsed()) {
      for (const auto& f : vidistill::emit_plots(log_path, plot_out_dir))
        std::cout << "wrote " << f << "\n";
    } else if (make_data->parsed()) {
      auto cfg = load_with_overrides(config_path, overrides);
      auto records = vidistill::build_dataset(cfg);
      std::string path = cfg.dataset.path.empty() ? cfg.out_dir + "/dataset.bin"
                                                  : cfg.dataset.path;
      std::filesystem::create_directories(std::filesystem::path(path).parent_path());
      vidistill::save_dataset(records, path);
      std::cout << "wrote " << records.size() << " videos to " << path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
