#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "tsg/checkpoint.hpp"
#include "tsg/config.hpp"
#include "tsg/dataset.hpp"
#include "tsg/kernels.hpp"
#include "tsg/train.hpp"

namespace fs = std::filesystem;
using namespace tsg;

int main(int argc, char** argv) {
  CLI::App app{"Transformer scale gate segmentation: data, training, evaluation, gate maps"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Render a synthetic dataset as PPM/PGM/JSON files");
  std::uint64_t gen_seed = 1;
  std::size_t gen_count = 10;
  std::string gen_out, gen_config;
  std::string gen_preset = "desk";
  gen->add_option("--seed", gen_seed, "Dataset seed")->required();
  gen->add_option("--count", gen_count, "Number of samples")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--config", gen_config, "Run config supplying the dataset settings");
  gen->add_option("--preset", gen_preset, "desk, overfit or paper");

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_out;
  std::optional<std::string> tr_preset;
  std::optional<std::uint64_t> tr_seed;
  tr->add_option("--config", tr_config, "Config file (key = value lines)");
  tr->add_option("--preset", tr_preset, "desk, overfit or paper; the config file is applied on top");
  tr->add_option("--seed", tr_seed, "Overrides the model seed");
  tr->add_option("--out", tr_out, "Run directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset directory");
  std::string ev_ckpt, ev_data, ev_report;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint (config.txt must sit beside it)")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--report", ev_report, "Report CSV")->required();

  // gates
  auto* ga = app.add_subcommand("gates", "Dump decoder scale gates for one sample");
  std::string ga_ckpt, ga_sample, ga_out;
  ga->add_option("--ckpt", ga_ckpt, "Checkpoint")->required();
  ga->add_option("--sample", ga_sample, "Sample stem or any of its .ppm/.pgm/.json files")->required();
  ga->add_option("--out", ga_out, "Output directory")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train and evaluate an ablation grid");
  std::string ab_suite, ab_out, ab_config;
  std::string ab_preset = "desk";
  std::size_t ab_seeds = 3;
  ab->add_option("--suite", ab_suite, "components, scales or tsg-variants")
      ->required()
      ->check(CLI::IsMember({"components", "scales", "tsg-variants"}));
  ab->add_option("--out", ab_out, "Output directory")->required();
  ab->add_option("--config", ab_config, "Config applied on top of the preset");
  ab->add_option("--preset", ab_preset, "Base preset");
  ab->add_option("--seeds", ab_seeds, "Seeds 0..N-1 per model");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      RunConfig cfg = RunConfig::preset_named(gen_preset);
      if (!gen_config.empty()) cfg.apply_file(gen_config);
      std::vector<SegSample> samples;
      for (std::size_t i = 0; i < gen_count; ++i) samples.push_back(generate(sample_seed(gen_seed, 0, i), cfg.dataset_config()));
      save_dataset(samples, gen_out);
      std::cout << "wrote " << gen_count << " samples to " << gen_out << '\n';
    } else if (*tr) {
      RunConfig cfg = RunConfig::preset_named(tr_preset.value_or("desk"));
      // A preset line inside the file rebases again, so it wins over --preset.
      if (!tr_config.empty()) cfg.apply_file(tr_config);
      if (tr_seed) cfg.seed = *tr_seed;
      const TrainResult r = run_training(cfg, tr_out, &std::cerr);
      std::printf("train patch accuracy %.4f\n", r.train_patch_accuracy);
      if (r.val_miou) std::printf("val mIoU %.4f\n", *r.val_miou);
    } else if (*ev) {
      RunConfig cfg;
      const auto model = load_model(ev_ckpt, &cfg);
      const auto data = load_dataset(ev_data);
      const EvalReport rep = evaluate(*model, data);
      write_eval_report(rep, ev_report);
      std::printf("mIoU %s over %zu samples\n", rep.miou.miou ? std::to_string(*rep.miou.miou).c_str() : "nan",
                  rep.samples);
    } else if (*ga) {
      const auto model = load_model(ga_ckpt);
      dump_gates(*model, load_sample(ga_sample), ga_out);
      std::cout << "wrote gate maps to " << ga_out << '\n';
    } else if (*ab) {
      RunConfig cfg = RunConfig::preset_named(ab_preset);
      if (!ab_config.empty()) cfg.apply_file(ab_config);
      std::vector<std::uint64_t> seeds(ab_seeds);
      for (std::size_t i = 0; i < ab_seeds; ++i) seeds[i] = i;
      run_ablation(ab_suite, cfg, seeds, ab_out, &std::cerr);
      std::cout << "wrote " << (fs::path(ab_out) / "ablation.csv").string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
