#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsg/config.hpp"
#include "tsg/metrics.hpp"
#include "tsg/model.hpp"

namespace tsg {

struct TrainData {
  std::vector<SegSample> train, val;
};

TrainData load_or_generate(const RunConfig& cfg);

struct MetricsRow {
  std::size_t step = 0;
  double lr = 0;
  double loss = 0;  // mean training loss since the previous row
  std::optional<double> miou;  // validation mIoU
};

std::string metrics_header();
std::string metrics_line(const MetricsRow& row);

struct TrainResult {
  std::vector<MetricsRow> rows;
  double train_patch_accuracy = 0;
  std::optional<double> val_miou;
};

/// Raised on a non-finite loss; the message carries the batch index and a
/// table of parameter norms.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Trains `model` in place. Rows are appended to `metrics_csv` as they are
/// produced when it is non-empty.
TrainResult train_model(SegModel& model, const RunConfig& cfg, const TrainData& data,
                        const std::filesystem::path& metrics_csv = {}, std::ostream* log = nullptr);

/// Full run: data, training, and artifacts in `out_dir`
/// (config.txt, metrics.csv, model.ckpt, summary.json).
TrainResult run_training(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream* log = nullptr);

struct EvalReport {
  std::size_t samples = 0;
  MiouResult miou;
  BucketIou buckets;
  double pixel_accuracy = 0;
  double patch_accuracy = 0;
};

EvalReport evaluate(const SegModel& model, std::span<const SegSample> samples);
void write_eval_report(const EvalReport& report, const std::filesystem::path& csv);

/// Model described by config.txt next to the checkpoint, with its weights.
std::unique_ptr<SegModel> load_model(const std::filesystem::path& checkpoint, RunConfig* cfg_out = nullptr);

/// Writes gates_block{l}_scale{s}.pgm, gates_block{l}_argmax.pgm and
/// gates_block{l}.csv for every gated decoder block.
void dump_gates(const SegModel& model, const SegSample& sample, const std::filesystem::path& out_dir);

struct AblationRow {
  std::string model;
  std::uint64_t seed = 0;
  std::optional<double> miou;
  BucketIou buckets;
};

std::vector<std::string> ablation_suite(const std::string& suite);
std::string ablation_header();
std::string ablation_line(const AblationRow& row);

/// Trains every model of the suite for each seed on one shared dataset and
/// writes ablation.csv (plus one run directory per model and seed).
std::vector<AblationRow> run_ablation(const std::string& suite, const RunConfig& base,
                                      const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                                      std::ostream* log = nullptr);

}  // namespace tsg
