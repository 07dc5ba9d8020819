#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tsg/dataset.hpp"

namespace tsg {

/// counts[gt * C + pred]; pixels labelled ignore_index in gt are skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  void add(std::span<const int> pred, std::span<const int> gt, int ignore_index = -1);
  void add_pixel(int pred, int gt);
  void merge(const ConfusionMatrix& other);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * classes_ + pred]; }
  std::uint64_t total() const;

  // nullopt when the class appears in neither gt nor pred.
  std::optional<double> iou(std::size_t c) const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

struct MiouResult {
  std::vector<std::optional<double>> per_class;
  std::optional<double> miou;  // mean over defined classes
};

MiouResult miou_from(const ConfusionMatrix& cm);
MiouResult miou(std::span<const int> pred, std::span<const int> gt, std::size_t classes, int ignore_index = -1);

struct BucketIou {
  std::optional<double> small, medium, large;
  std::optional<double>& operator[](SizeBucket b);
  const std::optional<double>& operator[](SizeBucket b) const;
};

/// Confusion matrices restricted to the visible pixels of the objects of
/// each size bucket.
struct BucketMatrices {
  explicit BucketMatrices(std::size_t classes) : small(classes), medium(classes), large(classes) {}
  ConfusionMatrix small, medium, large;
  ConfusionMatrix& operator[](SizeBucket b);

  void add(std::span<const int> pred, const SegSample& sample);
  BucketIou result() const;
};

BucketIou size_bucketed_iou(std::span<const int> pred, const SegSample& sample);

double pixel_accuracy(std::span<const int> pred, std::span<const int> gt);

}  // namespace tsg
