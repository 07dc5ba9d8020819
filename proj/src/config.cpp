#include "tsg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tsg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error("config: " + key + " expects an unsigned integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw Error("config: " + key + " expects a number, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("config: " + key + " expects true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_u64(key, trim(item)));
  if (out.empty()) throw Error("config: " + key + " expects a comma-separated list");
  return out;
}

std::string list_str(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// Shortest text that parses back to the same double.
std::string real_str(double d) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field size_field(T RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = static_cast<T>(parse_u64(k, v)); },
          [m](const RunConfig& c) { return std::to_string(c.*m); }};
}
Field real_field(double RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_real(k, v); },
          [m](const RunConfig& c) { return real_str(c.*m); }};
}
Field bool_field(bool RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_bool(k, v); },
          [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}
Field string_field(std::string RunConfig::*m) {
  return {[m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; },
          [m](const RunConfig& c) { return c.*m; }};
}
Field list_field(std::vector<std::size_t> RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_list(k, v); },
          [m](const RunConfig& c) { return list_str(c.*m); }};
}

// Ordered as written by to_text.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> kFields{
      {"preset", string_field(&RunConfig::preset)},
      {"model", string_field(&RunConfig::model)},
      {"seed", size_field(&RunConfig::seed)},
      {"data_seed", size_field(&RunConfig::data_seed)},
      {"image_h", size_field(&RunConfig::image_h)},
      {"image_w", size_field(&RunConfig::image_w)},
      {"classes", size_field(&RunConfig::classes)},
      {"train_samples", size_field(&RunConfig::train_samples)},
      {"val_samples", size_field(&RunConfig::val_samples)},
      {"min_objects", size_field(&RunConfig::min_objects)},
      {"max_objects", size_field(&RunConfig::max_objects)},
      {"noise", real_field(&RunConfig::noise)},
      {"hflip", bool_field(&RunConfig::hflip)},
      {"train_dir", string_field(&RunConfig::train_dir)},
      {"val_dir", string_field(&RunConfig::val_dir)},
      {"patch", size_field(&RunConfig::patch)},
      {"stage_blocks", list_field(&RunConfig::stage_blocks)},
      {"stage_dims", list_field(&RunConfig::stage_dims)},
      {"stage_heads", list_field(&RunConfig::stage_heads)},
      {"mlp_ratio", size_field(&RunConfig::mlp_ratio)},
      {"d_f", size_field(&RunConfig::d_f)},
      {"d_a", size_field(&RunConfig::d_a)},
      {"gate_hidden", size_field(&RunConfig::gate_hidden)},
      {"dec_blocks", size_field(&RunConfig::dec_blocks)},
      {"dec_heads", size_field(&RunConfig::dec_heads)},
      {"steps", size_field(&RunConfig::steps)},
      {"batch", size_field(&RunConfig::batch)},
      {"lr", real_field(&RunConfig::lr)},
      {"weight_decay", real_field(&RunConfig::weight_decay)},
      {"poly_power", real_field(&RunConfig::poly_power)},
      {"eval_every", size_field(&RunConfig::eval_every)},
      {"threads", size_field(&RunConfig::threads)},
  };
  return kFields;
}

}  // namespace

RunConfig RunConfig::preset_named(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "desk") return c;
  if (name == "overfit") {
    c.train_samples = 4;
    c.val_samples = 4;
    c.steps = 500;
    c.eval_every = 100;
    return c;
  }
  if (name == "paper") {
    // Large-scale numbers for reference; far beyond a desk CPU.
    c.image_h = c.image_w = 512;
    c.classes = 60;
    c.stage_blocks = {2, 2, 6, 2};
    c.stage_dims = {96, 192, 384, 768};
    c.stage_heads = {3, 6, 12, 24};
    c.d_f = 512;
    c.d_a = 512;
    c.gate_hidden = 512;
    c.dec_blocks = 3;
    c.dec_heads = 8;
    c.lr = 6e-5;
    c.weight_decay = 1e-2;
    c.batch = 16;
    c.steps = 80000;
    c.eval_every = 8000;
    c.train_samples = 4996;
    c.val_samples = 5104;
    return c;
  }
  throw Error("unknown preset '" + name + "' (expected desk, overfit or paper)");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  // A preset line rebases everything, so it belongs at the top of a file.
  if (key == "preset") {
    *this = preset_named(value);
    return;
  }
  for (const auto& [k, f] : fields()) {
    if (k == key) {
      f.set(*this, key, value);
      return;
    }
  }
  throw Error("config: unknown key '" + key + "'");
}

void RunConfig::apply_text(const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      set(key, value);
    } catch (const Error& e) {
      throw Error(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str(), path.string());
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  if (stage_blocks.size() != stage_dims.size() || stage_dims.size() != stage_heads.size()) {
    throw Error("config: stage_blocks, stage_dims and stage_heads must have the same length");
  }
  if (batch == 0) throw Error("config: batch must be positive");
  if (steps == 0) throw Error("config: steps must be positive");
  if (eval_every == 0) throw Error("config: eval_every must be positive");
  if (lr < 0 || weight_decay < 0) throw Error("config: lr and weight_decay must be nonnegative");
  if (train_dir.empty() && train_samples == 0) throw Error("config: no training samples");
  Baseline::parse(model);
  model_config().validate();
  dataset_config().validate();
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.encoder.image_h = image_h;
  m.encoder.image_w = image_w;
  m.encoder.patch = patch;
  m.encoder.mlp_ratio = mlp_ratio;
  m.encoder.stages.clear();
  for (std::size_t i = 0; i < stage_dims.size(); ++i) {
    m.encoder.stages.push_back({stage_blocks.at(i), stage_dims.at(i), stage_heads.at(i)});
  }
  m.d_f = d_f;
  m.tsg.d_a = d_a;
  m.tsg.hidden = gate_hidden;
  m.dec_blocks = dec_blocks;
  m.dec_heads = dec_heads;
  m.classes = classes;
  m.mlp_ratio = mlp_ratio;
  m.seed = seed;
  return make_baseline(Baseline::parse(model), m);
}

DatasetConfig RunConfig::dataset_config() const {
  DatasetConfig d;
  d.height = image_h;
  d.width = image_w;
  d.classes = classes;
  d.min_objects = min_objects;
  d.max_objects = max_objects;
  d.noise = noise;
  d.hflip = hflip;
  return d;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c;
  c.apply_file(path);
  return c;
}

}  // namespace tsg
