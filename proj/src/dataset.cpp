#include "tsg/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "tsg/rng.hpp"

namespace tsg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSceneStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kObjectStream = 1000;
constexpr int kPlacementRetries = 16;
constexpr std::size_t kMinObjectArea = 9;

struct Rgb {
  double r, g, b;
};

Rgb class_color(int cls) {
  static constexpr std::array<Rgb, 8> kPalette{{{0.85, 0.20, 0.20},
                                                {0.20, 0.75, 0.25},
                                                {0.20, 0.35, 0.90},
                                                {0.92, 0.82, 0.20},
                                                {0.75, 0.30, 0.85},
                                                {0.20, 0.85, 0.85},
                                                {0.95, 0.55, 0.15},
                                                {0.55, 0.35, 0.15}}};
  const auto idx = static_cast<std::size_t>(cls - 1);
  if (idx < kPalette.size()) return kPalette[idx];
  const CounterRng rng(hash_combine(0xc0102, static_cast<std::uint64_t>(cls)));
  return {rng.uniform(0, 0, 0.1, 0.95), rng.uniform(0, 1, 0.1, 0.95), rng.uniform(0, 2, 0.1, 0.95)};
}

std::pair<double, double> bucket_range(SizeBucket b, const DatasetConfig& cfg) {
  switch (b) {
    case SizeBucket::Small: return {0.004, cfg.small_max_fraction * 0.85};
    case SizeBucket::Medium: return {0.05, 0.15};
    case SizeBucket::Large: return {cfg.large_min_fraction * 1.05, cfg.large_min_fraction * 1.65};
  }
  return {0.05, 0.15};
}

std::size_t count_area(const ObjectMeta& o) {
  std::size_t area = 0;
  for (std::int64_t y = o.y0; y < o.y1; ++y) {
    for (std::int64_t x = o.x0; x < o.x1; ++x) area += o.covers(x, y) ? 1 : 0;
  }
  return area;
}

unsigned char to_byte(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

const char* bucket_name(SizeBucket b) {
  switch (b) {
    case SizeBucket::Small: return "small";
    case SizeBucket::Medium: return "medium";
    case SizeBucket::Large: return "large";
  }
  return "medium";
}

bool ObjectMeta::covers(std::int64_t x, std::int64_t y) const {
  if (x < x0 || x >= x1 || y < y0 || y >= y1) return false;
  if (kind == ShapeKind::Rect) return true;
  const std::int64_t dx = 2 * x + 1 - cx2, dy = 2 * y + 1 - cy2;
  return dx * dx * ry * ry + dy * dy * rx * rx <= 4 * rx * rx * ry * ry;
}

void DatasetConfig::validate() const {
  if (classes < 2) throw Error("dataset: at least two classes required (background + one object class)");
  if (classes > 256) throw Error("dataset: at most 256 classes fit an 8-bit label map");
  if (height == 0 || width == 0) throw Error("dataset: empty image size");
  if (min_objects > max_objects) throw Error("dataset: min_objects exceeds max_objects");
  if (small_weight < 0 || medium_weight < 0 || large_weight < 0 ||
      small_weight + medium_weight + large_weight <= 0) {
    throw Error("dataset: size mixture weights must be nonnegative and not all zero");
  }
}

SizeBucket classify_area(std::size_t area, std::size_t image_area, const DatasetConfig& cfg) {
  const double frac = double(area) / double(image_area);
  if (frac <= cfg.small_max_fraction) return SizeBucket::Small;
  if (frac >= cfg.large_min_fraction) return SizeBucket::Large;
  return SizeBucket::Medium;
}

SegSample generate(std::uint64_t seed, const DatasetConfig& cfg) {
  cfg.validate();
  const CounterRng rng(seed);
  const std::int64_t H = static_cast<std::int64_t>(cfg.height), W = static_cast<std::int64_t>(cfg.width);
  const std::size_t image_area = cfg.height * cfg.width;

  SegSample s;
  s.height = cfg.height;
  s.width = cfg.width;
  s.classes = cfg.classes;
  s.seed = seed;

  const auto n_objects = static_cast<std::size_t>(rng.integer(kSceneStream, 0, static_cast<std::int64_t>(cfg.min_objects),
                                                              static_cast<std::int64_t>(cfg.max_objects)));
  std::vector<std::pair<ObjectMeta, Rgb>> placed;
  const double total_weight = cfg.small_weight + cfg.medium_weight + cfg.large_weight;
  for (std::size_t i = 0; i < n_objects; ++i) {
    RngStream r(rng, kObjectStream + i);
    ObjectMeta o;
    o.cls = static_cast<int>(r.integer(1, static_cast<std::int64_t>(cfg.classes) - 1));
    const double pick = r.uniform() * total_weight;
    o.bucket = pick < cfg.small_weight                      ? SizeBucket::Small
               : pick < cfg.small_weight + cfg.medium_weight ? SizeBucket::Medium
                                                             : SizeBucket::Large;
    const Rgb base = class_color(o.cls);
    const Rgb color{base.r + r.uniform(-0.06, 0.06), base.g + r.uniform(-0.06, 0.06), base.b + r.uniform(-0.06, 0.06)};
    const auto [lo, hi] = bucket_range(o.bucket, cfg);

    bool ok = false;
    for (int attempt = 0; attempt < kPlacementRetries && !ok; ++attempt) {
      const double target = r.uniform(lo, hi) * double(image_area);
      const double aspect = std::exp(r.uniform(std::log(0.6), std::log(1.6)));
      o.kind = r.uniform() < 0.5 ? ShapeKind::Rect : ShapeKind::Ellipse;
      const double place_x = r.uniform(), place_y = r.uniform();
      if (o.kind == ShapeKind::Rect) {
        const auto w = std::max<std::int64_t>(2, std::llround(std::sqrt(target * aspect)));
        const auto h = std::max<std::int64_t>(2, std::llround(target / double(w)));
        if (w > W || h > H) continue;
        o.x0 = static_cast<std::int64_t>(place_x * double(W - w + 1));
        o.y0 = static_cast<std::int64_t>(place_y * double(H - h + 1));
        o.x1 = o.x0 + w;
        o.y1 = o.y0 + h;
      } else {
        o.rx = std::max<std::int64_t>(1, std::llround(std::sqrt(target * aspect / std::numbers::pi)));
        o.ry = std::max<std::int64_t>(1, std::llround(target / (std::numbers::pi * double(o.rx))));
        if (2 * o.rx > W || 2 * o.ry > H) continue;
        o.x0 = static_cast<std::int64_t>(place_x * double(W - 2 * o.rx + 1));
        o.y0 = static_cast<std::int64_t>(place_y * double(H - 2 * o.ry + 1));
        o.x1 = o.x0 + 2 * o.rx;
        o.y1 = o.y0 + 2 * o.ry;
        o.cx2 = o.x0 + o.x1;
        o.cy2 = o.y0 + o.y1;
      }
      o.area = count_area(o);
      ok = o.area >= kMinObjectArea && classify_area(o.area, image_area, cfg) == o.bucket;
    }
    if (!ok) {
      ++s.dropped;
      continue;
    }
    placed.emplace_back(o, color);
  }
  // Large objects go down first so smaller ones stay visible on top.
  std::stable_sort(placed.begin(), placed.end(),
                   [](const auto& a, const auto& b) { return a.first.area > b.first.area; });
  for (const auto& p : placed) s.objects.push_back(p.first);

  const std::vector<int> instance = rasterize_instances(s.objects, cfg.height, cfg.width);
  s.labels.assign(image_area, 0);
  s.image.assign(image_area * 3, 0.0);

  const double bg_level = rng.uniform(kSceneStream, 1, 0.35, 0.55);
  const double fx = rng.uniform(kSceneStream, 2, 0.08, 0.30), fy = rng.uniform(kSceneStream, 3, 0.08, 0.30);
  const double px = rng.uniform(kSceneStream, 4, 0.0, 6.3), py = rng.uniform(kSceneStream, 5, 0.0, 6.3);
  const Rgb tint{rng.uniform(kSceneStream, 6, -0.05, 0.05), rng.uniform(kSceneStream, 7, -0.05, 0.05),
                 rng.uniform(kSceneStream, 8, -0.05, 0.05)};
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const auto pix = static_cast<std::size_t>(y * W + x);
      Rgb c;
      if (instance[pix] >= 0) {
        auto& obj = s.objects[static_cast<std::size_t>(instance[pix])];
        s.labels[pix] = obj.cls;
        ++obj.visible_area;
        c = placed[static_cast<std::size_t>(instance[pix])].second;
      } else {
        const double tex = 0.10 * std::sin(fx * double(x) + px) * std::sin(fy * double(y) + py);
        c = {bg_level + tint.r + tex, bg_level + tint.g + tex, bg_level + tint.b + tex};
      }
      const std::array<double, 3> ch{c.r, c.g, c.b};
      for (std::size_t k = 0; k < 3; ++k) {
        const double v = ch[k] + cfg.noise * rng.normal(kNoiseStream, pix * 3 + k);
        s.image[pix * 3 + k] = double(to_byte(v)) / 255.0;
      }
    }
  }
  return cfg.hflip ? flip_horizontal(s) : s;
}

std::vector<int> rasterize_instances(const std::vector<ObjectMeta>& objects, std::size_t height, std::size_t width) {
  std::vector<int> out(height * width, -1);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const ObjectMeta& o = objects[i];
    const std::int64_t y_end = std::min<std::int64_t>(o.y1, static_cast<std::int64_t>(height));
    const std::int64_t x_end = std::min<std::int64_t>(o.x1, static_cast<std::int64_t>(width));
    for (std::int64_t y = std::max<std::int64_t>(0, o.y0); y < y_end; ++y) {
      for (std::int64_t x = std::max<std::int64_t>(0, o.x0); x < x_end; ++x) {
        if (o.covers(x, y)) out[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] = static_cast<int>(i);
      }
    }
  }
  return out;
}

SegSample flip_horizontal(const SegSample& s) {
  SegSample f = s;
  const std::size_t W = s.width;
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t src = y * W + x, dst = y * W + (W - 1 - x);
      f.labels[dst] = s.labels[src];
      for (std::size_t k = 0; k < 3; ++k) f.image[dst * 3 + k] = s.image[src * 3 + k];
    }
  }
  const auto w = static_cast<std::int64_t>(W);
  for (ObjectMeta& o : f.objects) {
    const std::int64_t x0 = w - o.x1, x1 = w - o.x0;
    o.x0 = x0;
    o.x1 = x1;
    if (o.kind == ShapeKind::Ellipse) o.cx2 = 2 * w - o.cx2;
  }
  return f;
}

std::vector<int> patch_labels(const std::vector<int>& labels, std::size_t height, std::size_t width, std::size_t patch,
                              std::size_t classes) {
  if (patch == 0 || height % patch != 0 || width % patch != 0) {
    throw ShapeError("patch_labels: image not divisible into " + std::to_string(patch) + "-pixel patches");
  }
  const std::size_t gh = height / patch, gw = width / patch;
  std::vector<int> out(gh * gw);
  std::vector<std::size_t> votes(classes);
  for (std::size_t py = 0; py < gh; ++py) {
    for (std::size_t px = 0; px < gw; ++px) {
      std::fill(votes.begin(), votes.end(), 0);
      for (std::size_t y = py * patch; y < (py + 1) * patch; ++y) {
        for (std::size_t x = px * patch; x < (px + 1) * patch; ++x) {
          const int l = labels[y * width + x];
          if (l < 0 || static_cast<std::size_t>(l) >= classes) throw Error("patch_labels: label out of range");
          ++votes[static_cast<std::size_t>(l)];
        }
      }
      out[py * gw + px] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
  }
  return out;
}

Tensor image_tensor(const SegSample& s) {
  std::vector<Real> v(s.image.begin(), s.image.end());
  return Tensor::from_data({s.height, s.width, 3}, std::move(v));
}

std::uint64_t sample_seed(std::uint64_t data_seed, std::uint64_t split, std::uint64_t index) {
  return hash_combine(hash_combine(data_seed, split), index);
}

std::vector<SegSample> generate_split(std::uint64_t data_seed, std::uint64_t split, std::size_t count,
                                      const DatasetConfig& cfg) {
  std::vector<SegSample> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = generate(sample_seed(data_seed, split, i), cfg);
  return out;
}

// --- export / import ------------------------------------------------------

namespace {

void write_pnm(const fs::path& path, const char* magic, std::size_t width, std::size_t height,
               const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << magic << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

fs::path stem_of(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ppm" || ext == ".pgm" || ext == ".json") {
    fs::path p = path;
    return p.replace_extension();
  }
  return path;
}

const char* shape_name(ShapeKind k) { return k == ShapeKind::Rect ? "rect" : "ellipse"; }

}  // namespace

void write_ppm(const fs::path& path, std::size_t width, std::size_t height, const std::vector<unsigned char>& rgb) {
  if (rgb.size() != width * height * 3) throw Error("write_ppm: pixel count mismatch");
  write_pnm(path, "P6", width, height, rgb);
}

void write_pgm(const fs::path& path, std::size_t width, std::size_t height, const std::vector<unsigned char>& gray) {
  if (gray.size() != width * height) throw Error("write_pgm: pixel count mismatch");
  write_pnm(path, "P5", width, height, gray);
}

RasterImage read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  const std::string magic = read_token(in);
  RasterImage img;
  if (magic == "P6") {
    img.channels = 3;
  } else if (magic == "P5") {
    img.channels = 1;
  } else {
    throw Error(path.string() + ": not a binary PPM/PGM (magic '" + magic + "')");
  }
  try {
    img.width = std::stoul(read_token(in));
    img.height = std::stoul(read_token(in));
    if (std::stoul(read_token(in)) != 255) throw Error(path.string() + ": only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw Error(path.string() + ": malformed header");
  }
  img.pixels.resize(img.width * img.height * img.channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) throw Error(path.string() + ": truncated pixel data");
  return img;
}

void save_sample(const SegSample& s, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  std::vector<unsigned char> rgb(s.image.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = to_byte(s.image[i]);
  write_ppm(dir / (stem + ".ppm"), s.width, s.height, rgb);
  std::vector<unsigned char> gray(s.labels.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = static_cast<unsigned char>(s.labels[i]);
  write_pgm(dir / (stem + ".pgm"), s.width, s.height, gray);

  json objects = json::array();
  for (const ObjectMeta& o : s.objects) {
    json j{{"class", o.cls},
           {"shape", shape_name(o.kind)},
           {"bbox", {o.x0, o.y0, o.x1, o.y1}},
           {"area", o.area},
           {"visible_area", o.visible_area},
           {"bucket", bucket_name(o.bucket)}};
    if (o.kind == ShapeKind::Ellipse) {
      j["center2"] = {o.cx2, o.cy2};
      j["radii"] = {o.rx, o.ry};
    }
    objects.push_back(std::move(j));
  }
  const json meta{{"seed", s.seed},     {"height", s.height},   {"width", s.width},
                  {"classes", s.classes}, {"dropped", s.dropped}, {"objects", std::move(objects)}};
  std::ofstream(dir / (stem + ".json")) << meta.dump(2) << '\n';
}

SegSample load_sample(const fs::path& path) {
  const fs::path stem = stem_of(path);
  fs::path ppm = stem, pgm = stem, meta_path = stem;
  ppm += ".ppm";
  pgm += ".pgm";
  meta_path += ".json";
  const RasterImage img = read_pnm(ppm);
  const RasterImage lab = read_pnm(pgm);
  if (img.channels != 3 || lab.channels != 1 || img.width != lab.width || img.height != lab.height) {
    throw Error("sample " + stem.string() + ": image and label map disagree");
  }
  SegSample s;
  s.width = img.width;
  s.height = img.height;
  s.image.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) s.image[i] = double(img.pixels[i]) / 255.0;
  s.labels.assign(lab.pixels.begin(), lab.pixels.end());

  std::ifstream in(meta_path);
  if (!in) throw Error("sample " + stem.string() + ": missing metadata " + meta_path.string());
  const json meta = json::parse(in);
  s.seed = meta.value("seed", std::uint64_t{0});
  s.classes = meta.value("classes", std::size_t{0});
  s.dropped = meta.value("dropped", std::size_t{0});
  for (const json& j : meta.at("objects")) {
    ObjectMeta o;
    o.cls = j.at("class").get<int>();
    o.kind = j.at("shape").get<std::string>() == "rect" ? ShapeKind::Rect : ShapeKind::Ellipse;
    const auto bbox = j.at("bbox").get<std::vector<std::int64_t>>();
    if (bbox.size() != 4) throw Error("sample " + stem.string() + ": bbox needs four values");
    o.x0 = bbox[0];
    o.y0 = bbox[1];
    o.x1 = bbox[2];
    o.y1 = bbox[3];
    if (o.kind == ShapeKind::Ellipse) {
      const auto c = j.at("center2").get<std::vector<std::int64_t>>();
      const auto r = j.at("radii").get<std::vector<std::int64_t>>();
      o.cx2 = c.at(0);
      o.cy2 = c.at(1);
      o.rx = r.at(0);
      o.ry = r.at(1);
    }
    o.area = j.at("area").get<std::size_t>();
    o.visible_area = j.value("visible_area", std::size_t{0});
    const std::string b = j.at("bucket").get<std::string>();
    o.bucket = b == "small" ? SizeBucket::Small : b == "large" ? SizeBucket::Large : SizeBucket::Medium;
    s.objects.push_back(o);
  }
  if (s.classes == 0) s.classes = static_cast<std::size_t>(*std::max_element(s.labels.begin(), s.labels.end())) + 1;
  return s;
}

void save_dataset(const std::vector<SegSample>& samples, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::ostringstream stem;
    stem << "sample_" << std::setw(5) << std::setfill('0') << i;
    save_sample(samples[i], dir, stem.str());
  }
  json index{{"count", samples.size()}};
  if (!samples.empty()) {
    index["height"] = samples.front().height;
    index["width"] = samples.front().width;
    index["classes"] = samples.front().classes;
  }
  std::ofstream(dir / "dataset.json") << index.dump(2) << '\n';
}

std::vector<SegSample> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("dataset directory not found: " + dir.string());
  std::vector<fs::path> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".ppm") stems.push_back(stem_of(entry.path()));
  }
  std::sort(stems.begin(), stems.end());
  std::vector<SegSample> out;
  for (const auto& s : stems) out.push_back(load_sample(s));
  return out;
}

}  // namespace tsg
