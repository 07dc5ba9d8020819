#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tsg/metrics.hpp"

using namespace tsg;

namespace {

std::vector<int> random_labels(std::size_t n, int classes, std::uint64_t seed) {
  const CounterRng rng(seed);
  std::vector<int> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<int>(rng.integer(0, i, 0, classes - 1));
  return v;
}

ObjectMeta rect(int cls, std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, SizeBucket b) {
  ObjectMeta o;
  o.cls = cls;
  o.x0 = x0;
  o.y0 = y0;
  o.x1 = x1;
  o.y1 = y1;
  o.area = static_cast<std::size_t>((x1 - x0) * (y1 - y0));
  o.bucket = b;
  return o;
}

}  // namespace

TEST(Metrics, PerfectAndDisjoint) {
  const auto gt = random_labels(256, 4, 1);
  EXPECT_EQ(*miou(gt, gt, 4).miou, 1.0);
  const std::vector<int> a(10, 1), b(10, 2);
  const MiouResult r = miou(a, b, 3);
  EXPECT_EQ(*r.per_class[1], 0.0);
  EXPECT_EQ(*r.per_class[2], 0.0);
  EXPECT_FALSE(r.per_class[0].has_value());
  EXPECT_EQ(*r.miou, 0.0);
}

TEST(Metrics, MatchesBruteForceOracle) {
  for (std::uint64_t t = 0; t < 100; ++t) {
    const int classes = 2 + int(t % 5);
    const auto gt = random_labels(256, classes, t * 2), pred = random_labels(256, classes - (t % 3 == 0), t * 2 + 1);
    const MiouResult r = miou(pred, gt, std::size_t(classes));
    const oracle::Miou o = oracle::miou(pred, gt, std::size_t(classes));
    ASSERT_EQ(r.miou.has_value(), o.any);
    EXPECT_EQ(*r.miou, o.mean);
    for (std::size_t c = 0; c < std::size_t(classes); ++c) {
      ASSERT_EQ(r.per_class[c].has_value(), bool(o.defined[c]));
      if (o.defined[c]) EXPECT_EQ(*r.per_class[c], o.iou[c]);
    }
  }
}

TEST(Metrics, IgnoreIndexAndAbsentClasses) {
  const std::vector<int> gt{0, 0, 1, -1, 1}, pred{0, 1, 1, 2, 1};
  const MiouResult r = miou(pred, gt, 4);
  const oracle::Miou o = oracle::miou(pred, gt, 4);
  EXPECT_EQ(*r.miou, o.mean);
  EXPECT_FALSE(r.per_class[2].has_value());  // its only prediction sits on an ignored pixel
  EXPECT_FALSE(r.per_class[3].has_value());
  EXPECT_DOUBLE_EQ(*r.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(*r.per_class[1], 2.0 / 3.0);
}

TEST(Metrics, SwappingLabelsKeepsMiou) {
  for (std::uint64_t t = 0; t < 20; ++t) {
    auto gt = random_labels(100, 3, t), pred = random_labels(100, 3, t + 50);
    const double before = *miou(pred, gt, 3).miou;
    for (auto* v : {&gt, &pred})
      for (int& x : *v) x = x == 0 ? 2 : x == 2 ? 0 : x;
    EXPECT_NEAR(*miou(pred, gt, 3).miou, before, 1e-15);
  }
}

TEST(Metrics, ErrorsAndConfusionTotals) {
  EXPECT_THROW(miou(std::vector<int>{0, 1}, std::vector<int>{0}, 2), ShapeError);
  EXPECT_THROW(miou(std::vector<int>{0, 5}, std::vector<int>{0, 1}, 2), Error);
  ConfusionMatrix cm(3);
  cm.add(std::vector<int>{0, 1, 2, 2}, std::vector<int>{0, 1, 1, -1});
  EXPECT_EQ(cm.total(), 3u);
  EXPECT_EQ(cm.at(1, 2), 1u);
  EXPECT_FALSE(miou_from(ConfusionMatrix(2)).miou.has_value());
}

TEST(Metrics, BucketedIouHandCounted) {
  // 8x8 image: small 2x2 object of class 1 at (1,1); large 6x4 object of class 2 at rows 4..7, cols 2..7.
  SegSample s;
  s.height = s.width = 8;
  s.classes = 3;
  s.objects = {rect(2, 2, 4, 8, 8, SizeBucket::Large), rect(1, 1, 1, 3, 3, SizeBucket::Small)};
  s.labels.assign(64, 0);
  for (int y = 4; y < 8; ++y)
    for (int x = 2; x < 8; ++x) s.labels[y * 8 + x] = 2;
  for (int y = 1; y < 3; ++y)
    for (int x = 1; x < 3; ++x) s.labels[y * 8 + x] = 1;

  auto pred = s.labels;
  const BucketIou perfect = size_bucketed_iou(pred, s);
  EXPECT_EQ(*perfect.small, 1.0);
  EXPECT_EQ(*perfect.large, 1.0);
  EXPECT_FALSE(perfect.medium.has_value());

  // Small object: one pixel predicted background -> IoU_1 = 3/4.
  pred[1 * 8 + 1] = 0;
  // Large object: 6 pixels predicted class 1 -> IoU_2 = 18/24; class 1 only predicted there.
  for (int x = 2; x < 8; ++x) pred[7 * 8 + x] = 1;
  const BucketIou b = size_bucketed_iou(pred, s);
  EXPECT_DOUBLE_EQ(*b.small, 0.75);
  EXPECT_DOUBLE_EQ(*b.large, 0.75);
}

TEST(Metrics, AllLargeLeavesSmallUndefined) {
  SegSample s;
  s.height = s.width = 4;
  s.classes = 2;
  s.objects = {rect(1, 0, 0, 4, 4, SizeBucket::Large)};
  s.labels.assign(16, 1);
  const BucketIou b = size_bucketed_iou(s.labels, s);
  EXPECT_FALSE(b.small.has_value());
  EXPECT_EQ(*b.large, 1.0);
}

TEST(Metrics, PixelAccuracy) {
  EXPECT_DOUBLE_EQ(pixel_accuracy(std::vector<int>{0, 1, 1, 1}, std::vector<int>{0, 1, 0, 1}), 0.75);
  EXPECT_THROW(pixel_accuracy(std::vector<int>{}, std::vector<int>{}), Error);
}
