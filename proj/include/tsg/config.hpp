#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsg/dataset.hpp"
#include "tsg/model.hpp"

namespace tsg {

/// Every knob of a run as one flat key/value document.
struct RunConfig {
  std::string preset = "desk";
  std::string model = "tsg";  // baseline name, see Baseline::parse
  std::uint64_t seed = 0;     // parameter init and batch order
  std::uint64_t data_seed = 1;

  // data
  std::size_t image_h = 64, image_w = 64;
  std::size_t classes = 5;
  std::size_t train_samples = 200, val_samples = 50;
  std::size_t min_objects = 1, max_objects = 4;
  double noise = 0.05;
  bool hflip = false;
  std::string train_dir;  // load instead of generating when set
  std::string val_dir;

  // model
  std::size_t patch = 4;
  std::vector<std::size_t> stage_blocks{1, 1, 1};
  std::vector<std::size_t> stage_dims{32, 64, 128};
  std::vector<std::size_t> stage_heads{2, 4, 4};
  std::size_t mlp_ratio = 4;
  std::size_t d_f = 64, d_a = 64, gate_hidden = 64;
  std::size_t dec_blocks = 3, dec_heads = 4;

  // optimization
  std::size_t steps = 1000;
  std::size_t batch = 4;
  double lr = 1e-3;
  double weight_decay = 1e-2;
  double poly_power = 0.9;
  std::size_t eval_every = 100;
  std::size_t threads = 0;  // 0 = OpenMP default

  static RunConfig preset_named(const std::string& name);
  // Applies `key = value` lines on top of *this; unknown keys are errors.
  void apply_text(const std::string& text, const std::string& origin = "config");
  void apply_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
  void validate() const;

  ModelConfig model_config() const;
  DatasetConfig dataset_config() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace tsg
