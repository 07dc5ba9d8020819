#include "tsg/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "tsg/checkpoint.hpp"
#include "tsg/kernels.hpp"
#include "tsg/optim.hpp"
#include "tsg/rng.hpp"

namespace tsg {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTrainSplit = 0;
constexpr std::uint64_t kValSplit = 1;

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "nan"; }

struct Prepared {
  Tensor image;
  std::vector<int> patch_labels;
};

std::vector<Prepared> prepare(std::span<const SegSample> samples, const ModelConfig& mc) {
  std::vector<Prepared> out;
  for (const SegSample& s : samples) {
    if (s.height != mc.encoder.image_h || s.width != mc.encoder.image_w) {
      throw Error("sample is " + std::to_string(s.height) + "x" + std::to_string(s.width) + ", model expects " +
                  std::to_string(mc.encoder.image_h) + "x" + std::to_string(mc.encoder.image_w));
    }
    out.push_back({image_tensor(s), tsg::patch_labels(s.labels, s.height, s.width, mc.encoder.patch, mc.classes)});
  }
  return out;
}

std::vector<int> argmax_rows(const Tensor& scores) {
  const std::size_t n = scores.dim(0), c = scores.dim(1);
  const auto d = scores.data();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k) {
      if (d[i * c + k] > d[i * c + best]) best = k;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

double patch_accuracy(const SegModel& model, std::span<const Prepared> data) {
  NoGradGuard ng;
  std::size_t hit = 0, total = 0;
  for (const Prepared& p : data) {
    const auto pred = argmax_rows(model.forward(p.image).scores);
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == p.patch_labels[i] ? 1 : 0;
    total += pred.size();
  }
  return total ? double(hit) / double(total) : 0.0;
}

std::string norm_table(const ParamStore& store) {
  std::ostringstream os;
  os << "parameter norms:\n";
  for (const Parameter& p : store.params()) {
    double sq = 0;
    for (Real v : p.tensor.data()) sq += double(v) * double(v);
    os << "  " << std::left << std::setw(48) << p.name << ' ' << std::sqrt(sq) << '\n';
  }
  return os.str();
}

// Sample order of one epoch, a pure function of (seed, epoch).
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const CounterRng rng(hash_combine(seed, hash_string("batch-order")));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.integer(epoch, i, 0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace

TrainData load_or_generate(const RunConfig& cfg) {
  TrainData d;
  const DatasetConfig dc = cfg.dataset_config();
  d.train = cfg.train_dir.empty() ? generate_split(cfg.data_seed, kTrainSplit, cfg.train_samples, dc)
                                  : load_dataset(cfg.train_dir);
  d.val = cfg.val_dir.empty() ? generate_split(cfg.data_seed, kValSplit, cfg.val_samples, dc) : load_dataset(cfg.val_dir);
  if (d.train.empty()) throw Error("training set is empty");
  return d;
}

std::string metrics_header() { return "step,lr,loss,mIoU"; }

std::string metrics_line(const MetricsRow& r) {
  return std::to_string(r.step) + "," + fmt(r.lr, "%.9g") + "," + fmt(r.loss, "%.9g") + "," + fmt_opt(r.miou);
}

TrainResult train_model(SegModel& model, const RunConfig& cfg, const TrainData& data, const fs::path& metrics_csv,
                        std::ostream* log) {
  cfg.validate();
  if (cfg.threads > 0) kernels::set_threads(static_cast<int>(cfg.threads));
  const ModelConfig& mc = model.config();
  const std::vector<Prepared> train = prepare(data.train, mc);

  std::ofstream csv;
  if (!metrics_csv.empty()) {
    csv.open(metrics_csv);
    if (!csv) throw Error("cannot write " + metrics_csv.string());
    csv << metrics_header() << '\n';
  }

  AdamWConfig oc;
  oc.lr = cfg.lr;
  oc.weight_decay = cfg.weight_decay;
  AdamW opt(model.params(), oc);

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> order;
  std::uint64_t epoch = 0;
  std::size_t cursor = train.size();
  double loss_sum = 0;
  std::size_t loss_count = 0;
  const Real inv_batch = Real(1) / static_cast<Real>(cfg.batch);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double lr = poly_lr(step, cfg.steps, cfg.lr, cfg.poly_power);
    opt.set_lr(lr);
    model.params().zero_grad();
    double batch_loss = 0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      if (cursor == train.size()) {
        order = epoch_order(cfg.seed, epoch++, train.size());
        cursor = 0;
      }
      const Prepared& p = train[order[cursor++]];
      const Tensor loss = model.loss(p.image, p.patch_labels);
      const double v = loss.item();
      if (!std::isfinite(v)) {
        throw TrainingDiverged("non-finite loss at step " + std::to_string(step) + ", batch index " +
                               std::to_string(b) + " (sample " + std::to_string(order[cursor - 1]) + ")\n" +
                               norm_table(model.params()));
      }
      batch_loss += v;
      scale(loss, inv_batch).backward();
    }
    opt.step(model.params());
    loss_sum += batch_loss / double(cfg.batch);
    ++loss_count;

    const std::size_t done = step + 1;
    if (done % cfg.eval_every == 0 || done == cfg.steps) {
      MetricsRow row;
      row.step = done;
      row.lr = lr;
      row.loss = loss_sum / double(loss_count);
      if (!data.val.empty()) row.miou = evaluate(model, data.val).miou.miou;
      loss_sum = 0;
      loss_count = 0;
      result.rows.push_back(row);
      if (csv.is_open()) csv << metrics_line(row) << '\n' << std::flush;
      if (log) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        *log << "step " << done << "/" << cfg.steps << "  lr " << fmt(lr, "%.3g") << "  loss " << fmt(row.loss, "%.4f")
             << "  val mIoU " << fmt_opt(row.miou) << "  (" << fmt(secs, "%.1f") << " s)" << std::endl;
      }
    }
  }
  result.train_patch_accuracy = patch_accuracy(model, train);
  if (!result.rows.empty()) result.val_miou = result.rows.back().miou;
  return result;
}

TrainResult run_training(const RunConfig& cfg, const fs::path& out_dir, std::ostream* log) {
  cfg.validate();
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "config.txt") << cfg.to_text();
  const TrainData data = load_or_generate(cfg);
  SegModel model(cfg.model_config());
  if (log) {
    *log << "model " << cfg.model << ": " << model.params().scalar_count() << " parameters, " << data.train.size()
         << " train / " << data.val.size() << " val samples" << std::endl;
  }
  TrainResult r = train_model(model, cfg, data, out_dir / "metrics.csv", log);
  save_checkpoint(model.params(), out_dir / "model.ckpt");
  const nlohmann::json summary{{"model", cfg.model},
                               {"seed", cfg.seed},
                               {"steps", cfg.steps},
                               {"train_patch_accuracy", r.train_patch_accuracy},
                               {"val_miou", r.val_miou ? nlohmann::json(*r.val_miou) : nlohmann::json(nullptr)}};
  std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
  return r;
}

EvalReport evaluate(const SegModel& model, std::span<const SegSample> samples) {
  if (samples.empty()) throw Error("evaluate: empty dataset");
  const ModelConfig& mc = model.config();
  NoGradGuard ng;
  EvalReport r;
  ConfusionMatrix cm(mc.classes);
  BucketMatrices buckets(mc.classes);
  std::size_t pix_hit = 0, pix_total = 0, patch_hit = 0, patch_total = 0;
  for (const SegSample& s : samples) {
    if (s.classes != 0 && s.classes != mc.classes) {
      throw Error("evaluate: dataset has " + std::to_string(s.classes) + " classes, model predicts " +
                  std::to_string(mc.classes));
    }
    if (s.height != mc.encoder.image_h || s.width != mc.encoder.image_w) {
      throw Error("evaluate: sample size does not match the model input size");
    }
    const ForwardResult f = model.forward(image_tensor(s));
    const std::vector<int> pred = logits_to_mask({f.scores, f.grid}, s.height, s.width);
    cm.add(pred, s.labels);
    buckets.add(pred, s);
    for (std::size_t i = 0; i < pred.size(); ++i) pix_hit += pred[i] == s.labels[i] ? 1 : 0;
    pix_total += pred.size();
    const auto pl = patch_labels(s.labels, s.height, s.width, mc.encoder.patch, mc.classes);
    const auto pp = argmax_rows(f.scores);
    for (std::size_t i = 0; i < pp.size(); ++i) patch_hit += pp[i] == pl[i] ? 1 : 0;
    patch_total += pp.size();
  }
  r.samples = samples.size();
  r.miou = miou_from(cm);
  r.buckets = buckets.result();
  r.pixel_accuracy = double(pix_hit) / double(pix_total);
  r.patch_accuracy = double(patch_hit) / double(patch_total);
  return r;
}

void write_eval_report(const EvalReport& r, const fs::path& csv) {
  std::ofstream out(csv);
  if (!out) throw Error("cannot write " + csv.string());
  out << "metric,value\n";
  out << "samples," << r.samples << '\n';
  out << "mIoU," << fmt_opt(r.miou.miou) << '\n';
  for (std::size_t c = 0; c < r.miou.per_class.size(); ++c) out << "iou_class" << c << ',' << fmt_opt(r.miou.per_class[c]) << '\n';
  out << "small_iou," << fmt_opt(r.buckets.small) << '\n';
  out << "medium_iou," << fmt_opt(r.buckets.medium) << '\n';
  out << "large_iou," << fmt_opt(r.buckets.large) << '\n';
  out << "pixel_accuracy," << fmt(r.pixel_accuracy) << '\n';
  out << "patch_accuracy," << fmt(r.patch_accuracy) << '\n';
}

std::unique_ptr<SegModel> load_model(const fs::path& checkpoint, RunConfig* cfg_out) {
  const fs::path cfg_path = checkpoint.parent_path() / "config.txt";
  if (!fs::exists(cfg_path)) {
    throw Error("no config.txt next to " + checkpoint.string() + " (it describes the model architecture)");
  }
  const RunConfig cfg = load_run_config(cfg_path);
  auto model = std::make_unique<SegModel>(cfg.model_config());
  load_checkpoint(model->params(), checkpoint);
  if (cfg_out) *cfg_out = cfg;
  return model;
}

void dump_gates(const SegModel& model, const SegSample& sample, const fs::path& out_dir) {
  if (!model.has_decoder_gates()) throw Error("gates: model has no decoder scale gates (needs tsgd decoder fusion)");
  NoGradGuard ng;
  const ForwardResult f = model.forward(image_tensor(sample));
  fs::create_directories(out_dir);
  const SpatialSize grid = f.grid;
  for (std::size_t i = 0; i < f.decoder.gates.size(); ++i) {
    const std::size_t block = i + 2;
    const ScaleGates& g = f.decoder.gates[i];
    const std::size_t S = g.num_scales, N = g.gates.dim(0);
    const auto v = g.gates.data();
    const std::string stem = "gates_block" + std::to_string(block);
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<unsigned char> px(N);
      for (std::size_t n = 0; n < N; ++n) px[n] = static_cast<unsigned char>(std::lround(255.0 * double(v[n * S + s])));
      write_pgm(out_dir / (stem + "_scale" + std::to_string(s + 1) + ".pgm"), grid.w, grid.h, px);
    }
    std::vector<unsigned char> arg(N);
    for (std::size_t n = 0; n < N; ++n) {
      std::size_t best = 0;
      for (std::size_t s = 1; s < S; ++s) {
        if (v[n * S + s] > v[n * S + best]) best = s;
      }
      arg[n] = static_cast<unsigned char>(S > 1 ? (255 * best) / (S - 1) : 255);
    }
    write_pgm(out_dir / (stem + "_argmax.pgm"), grid.w, grid.h, arg);
    std::ofstream csv(out_dir / (stem + ".csv"));
    csv << "patch";
    for (std::size_t s = 0; s < S; ++s) csv << ",scale" << s + 1;
    csv << '\n';
    for (std::size_t n = 0; n < N; ++n) {
      csv << n;
      for (std::size_t s = 0; s < S; ++s) csv << ',' << fmt(double(v[n * S + s]), "%.9g");
      csv << '\n';
    }
  }
}

std::vector<std::string> ablation_suite(const std::string& suite) {
  if (suite == "scales") return {"single_scale:1", "single_scale:2", "single_scale:3", "plain_sum", "fpn_sum", "tsg"};
  if (suite == "components") return {"plain_sum", "plain_tsgd", "fpn_sum", "tsge_base", "fpn_tsgd", "tsg"};
  if (suite == "tsg-variants") return {"tsg", "tsg_shared", "tsg_head_avg"};
  throw Error("unknown ablation suite '" + suite + "' (expected components, scales or tsg-variants)");
}

std::string ablation_header() { return "model,seed,mIoU,small_iou,medium_iou,large_iou"; }

std::string ablation_line(const AblationRow& r) {
  return r.model + "," + std::to_string(r.seed) + "," + fmt_opt(r.miou) + "," + fmt_opt(r.buckets.small) + "," +
         fmt_opt(r.buckets.medium) + "," + fmt_opt(r.buckets.large);
}

std::vector<AblationRow> run_ablation(const std::string& suite, const RunConfig& base,
                                      const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                                      std::ostream* log) {
  std::vector<std::string> models = ablation_suite(suite);
  // Suites name stages 1..3; trim to what the base encoder has.
  std::erase_if(models, [&](const std::string& m) {
    const Baseline b = Baseline::parse(m);
    return b.kind == Baseline::Kind::SingleScale && b.scale > base.stage_dims.size();
  });
  fs::create_directories(out_dir);
  const TrainData data = load_or_generate(base);
  if (data.val.empty()) throw Error("ablate: validation set is empty");
  std::ofstream csv(out_dir / "ablation.csv");
  csv << ablation_header() << '\n';
  std::vector<AblationRow> rows;
  for (const std::string& name : models) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.model = name;
      cfg.seed = seed;
      std::string dir_name = name + "_seed" + std::to_string(seed);
      std::replace(dir_name.begin(), dir_name.end(), ':', '_');
      const fs::path run_dir = out_dir / dir_name;
      fs::create_directories(run_dir);
      std::ofstream(run_dir / "config.txt") << cfg.to_text();
      if (log) *log << "== " << name << " seed " << seed << std::endl;
      SegModel model(cfg.model_config());
      train_model(model, cfg, data, run_dir / "metrics.csv", log);
      save_checkpoint(model.params(), run_dir / "model.ckpt");
      const EvalReport rep = evaluate(model, data.val);
      AblationRow row{name, seed, rep.miou.miou, rep.buckets};
      csv << ablation_line(row) << '\n' << std::flush;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace tsg
