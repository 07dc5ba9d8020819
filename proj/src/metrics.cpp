#include "tsg/metrics.hpp"

#include <numeric>

namespace tsg {

void ConfusionMatrix::add_pixel(int pred, int gt) {
  if (gt < 0 || pred < 0 || static_cast<std::size_t>(gt) >= classes_ || static_cast<std::size_t>(pred) >= classes_) {
    throw Error("confusion matrix: label out of range (gt " + std::to_string(gt) + ", pred " + std::to_string(pred) +
                ", " + std::to_string(classes_) + " classes)");
  }
  ++counts_[static_cast<std::size_t>(gt) * classes_ + static_cast<std::size_t>(pred)];
}

void ConfusionMatrix::add(std::span<const int> pred, std::span<const int> gt, int ignore_index) {
  if (pred.size() != gt.size()) {
    throw ShapeError("miou: prediction has " + std::to_string(pred.size()) + " pixels, ground truth " +
                     std::to_string(gt.size()));
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore_index) continue;
    add_pixel(pred[i], gt[i]);
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw Error("confusion matrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::optional<double> ConfusionMatrix::iou(std::size_t c) const {
  std::uint64_t tp = at(c, c), fp = 0, fn = 0;
  for (std::size_t k = 0; k < classes_; ++k) {
    if (k == c) continue;
    fn += at(c, k);
    fp += at(k, c);
  }
  const std::uint64_t denom = tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return double(tp) / double(denom);
}

MiouResult miou_from(const ConfusionMatrix& cm) {
  MiouResult r;
  double sum = 0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    r.per_class.push_back(cm.iou(c));
    if (r.per_class.back()) {
      sum += *r.per_class.back();
      ++defined;
    }
  }
  if (defined > 0) r.miou = sum / double(defined);
  return r;
}

MiouResult miou(std::span<const int> pred, std::span<const int> gt, std::size_t classes, int ignore_index) {
  ConfusionMatrix cm(classes);
  cm.add(pred, gt, ignore_index);
  return miou_from(cm);
}

std::optional<double>& BucketIou::operator[](SizeBucket b) {
  return b == SizeBucket::Small ? small : b == SizeBucket::Large ? large : medium;
}
const std::optional<double>& BucketIou::operator[](SizeBucket b) const {
  return b == SizeBucket::Small ? small : b == SizeBucket::Large ? large : medium;
}

ConfusionMatrix& BucketMatrices::operator[](SizeBucket b) {
  return b == SizeBucket::Small ? small : b == SizeBucket::Large ? large : medium;
}

void BucketMatrices::add(std::span<const int> pred, const SegSample& sample) {
  if (pred.size() != sample.labels.size()) throw ShapeError("size_bucketed_iou: prediction size mismatch");
  const std::vector<int> owner = rasterize_instances(sample.objects, sample.height, sample.width);
  for (std::size_t i = 0; i < owner.size(); ++i) {
    if (owner[i] < 0) continue;
    const ObjectMeta& o = sample.objects[static_cast<std::size_t>(owner[i])];
    (*this)[o.bucket].add_pixel(pred[i], sample.labels[i]);
  }
}

namespace {

// Mean IoU over the classes that own ground-truth pixels inside the region;
// predicted-only classes (typically background bleeding into an object)
// count as errors of the owning class rather than as classes of their own.
std::optional<double> region_iou(const ConfusionMatrix& cm) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    std::uint64_t gt_count = 0;
    for (std::size_t k = 0; k < cm.classes(); ++k) gt_count += cm.at(c, k);
    if (gt_count == 0) continue;
    sum += *cm.iou(c);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / double(n);
}

}  // namespace

BucketIou BucketMatrices::result() const {
  return {region_iou(small), region_iou(medium), region_iou(large)};
}

BucketIou size_bucketed_iou(std::span<const int> pred, const SegSample& sample) {
  BucketMatrices m(sample.classes);
  m.add(pred, sample);
  return m.result();
}

double pixel_accuracy(std::span<const int> pred, std::span<const int> gt) {
  if (pred.size() != gt.size()) throw ShapeError("pixel_accuracy: size mismatch");
  if (gt.empty()) throw Error("pixel_accuracy: no pixels");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) hit += pred[i] == gt[i] ? 1 : 0;
  return double(hit) / double(gt.size());
}

}  // namespace tsg
