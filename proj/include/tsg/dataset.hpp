#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsg/tensor.hpp"

namespace tsg {

enum class SizeBucket { Small, Medium, Large };
enum class ShapeKind { Rect, Ellipse };

const char* bucket_name(SizeBucket b);

/// One rendered object. Geometry is integral so every rasterizer agrees:
///  - Rect covers pixels x0 <= x < x1, y0 <= y < y1.
///  - Ellipse covers pixels whose centre satisfies
///    (2x+1-cx2)²·ry² + (2y+1-cy2)²·rx² <= 4·rx²·ry²  (cx2, cy2 = doubled centre).
struct ObjectMeta {
  int cls = 1;
  ShapeKind kind = ShapeKind::Rect;
  std::int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // bounding box, half-open
  std::int64_t cx2 = 0, cy2 = 0, rx = 0, ry = 0;  // ellipse only
  std::size_t area = 0;                           // pixels before occlusion
  std::size_t visible_area = 0;
  SizeBucket bucket = SizeBucket::Medium;

  bool covers(std::int64_t x, std::int64_t y) const;
};

struct DatasetConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t classes = 5;  // including background class 0
  std::size_t min_objects = 1;
  std::size_t max_objects = 4;
  // Relative frequencies of small / medium / large objects.
  double small_weight = 0.45;
  double medium_weight = 0.30;
  double large_weight = 0.25;
  double small_max_fraction = 0.03;  // small: area <= 3% of the image
  double large_min_fraction = 0.20;  // large: area >= 20%
  double noise = 0.05;
  bool hflip = false;

  void validate() const;
};

/// Image in [0,1] (quantized to 1/255 so PPM export is lossless) and labels.
struct SegSample {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  std::vector<double> image;  // H×W×3, row-major
  std::vector<int> labels;    // H×W
  std::vector<ObjectMeta> objects;  // in drawing order; later ones occlude earlier ones
  std::size_t dropped = 0;          // objects abandoned after bounded placement retries
  std::uint64_t seed = 0;
};

SizeBucket classify_area(std::size_t area, std::size_t image_area, const DatasetConfig& cfg);

/// Deterministic per (seed, cfg).
SegSample generate(std::uint64_t seed, const DatasetConfig& cfg);

/// Per-pixel index of the visible object (-1 for background), painter order.
std::vector<int> rasterize_instances(const std::vector<ObjectMeta>& objects, std::size_t height, std::size_t width);

SegSample flip_horizontal(const SegSample& s);

/// Majority label of each patch, ties to the lowest class.
std::vector<int> patch_labels(const std::vector<int>& labels, std::size_t height, std::size_t width, std::size_t patch,
                              std::size_t classes);

Tensor image_tensor(const SegSample& s);

/// Seeds of the i-th training / validation sample of a generated split.
std::uint64_t sample_seed(std::uint64_t data_seed, std::uint64_t split, std::uint64_t index);
std::vector<SegSample> generate_split(std::uint64_t data_seed, std::uint64_t split, std::size_t count,
                                      const DatasetConfig& cfg);

// --- export / import ------------------------------------------------------
// A dataset directory holds <stem>.ppm (P6), <stem>.pgm (P5, gray = class)
// and <stem>.json (object metadata) per sample, plus dataset.json.

void write_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<unsigned char>& rgb);
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<unsigned char>& gray);
struct RasterImage {
  std::size_t width = 0, height = 0, channels = 0;
  std::vector<unsigned char> pixels;
};
RasterImage read_pnm(const std::filesystem::path& path);

void save_sample(const SegSample& s, const std::filesystem::path& dir, const std::string& stem);
/// `path` may name the stem or any of its three files.
SegSample load_sample(const std::filesystem::path& path);

void save_dataset(const std::vector<SegSample>& samples, const std::filesystem::path& dir);
std::vector<SegSample> load_dataset(const std::filesystem::path& dir);

}  // namespace tsg
