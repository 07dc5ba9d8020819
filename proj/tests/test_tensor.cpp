#include <gtest/gtest.h>

#include "tsg/ops.hpp"

using namespace tsg;

TEST(Tensor, FromDataChecksSize) {
  EXPECT_THROW(Tensor::from_data({2, 3}, std::vector<Real>(5)), ShapeError);
  EXPECT_THROW(Tensor::from_data({0, 3}, {}), ShapeError);
  const Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_THROW(t.dim(2), ShapeError);
  EXPECT_EQ(shape_str(t.shape()), "[2x3]");
}

TEST(Tensor, CopiesShareStorage) {
  Tensor a = Tensor::zeros({3});
  Tensor b = a;
  b.mutable_data()[1] = 5;
  EXPECT_EQ(a[1], 5);
  EXPECT_TRUE(a.same_storage(b));
  const Tensor c = a.detach();
  EXPECT_FALSE(c.same_storage(a));
  EXPECT_EQ(c[1], 5);
}

TEST(Tensor, UndefinedTensorThrows) {
  const Tensor t;
  EXPECT_FALSE(t.defined());
  EXPECT_THROW(t.shape(), Error);
}

TEST(Tensor, ItemNeedsScalar) {
  EXPECT_THROW(Tensor::zeros({2}).item(), ShapeError);
  EXPECT_EQ(Tensor::scalar(3).item(), 3);
}

TEST(Tensor, BackwardAccumulatesIntoLeaves) {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  const auto loss = [&] { return sum(mul(x, x)); };
  loss().backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2);
  EXPECT_DOUBLE_EQ(x.grad()[1], 4);
  loss().backward();
  EXPECT_DOUBLE_EQ(x.grad()[1], 8);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[1], 0);
}

TEST(Tensor, DiamondGraphSumsBothPaths) {
  Tensor x = Tensor::from_data({1}, {3}, true);
  const Tensor y = scale(x, 2);
  // d/dx (2x·2x + 2x) = 8x + 2
  sum(add(mul(y, y), y)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 26);
}

TEST(Tensor, IntermediateGradsResetBetweenCalls) {
  Tensor x = Tensor::from_data({1}, {1}, true);
  const Tensor y = scale(x, 3);
  const Tensor loss = sum(y);
  loss.backward();
  loss.backward();
  EXPECT_DOUBLE_EQ(y.grad()[0], 1);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6);
}

TEST(Tensor, BackwardNeedsScalar) {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  EXPECT_THROW(scale(x, 2).backward(), ShapeError);
}

TEST(Tensor, NoGradGuardSkipsGraph) {
  Tensor x = Tensor::from_data({1}, {1}, true);
  {
    NoGradGuard ng;
    EXPECT_FALSE(grad_enabled());
    const Tensor y = scale(x, 2);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(scale(x, 2).requires_grad());
}

TEST(Tensor, ConstantsTakeNoGradient) {
  const Tensor c = Tensor::from_data({1}, {2});
  Tensor x = Tensor::from_data({1}, {3}, true);
  sum(mul(c, x)).backward();
  EXPECT_FALSE(c.has_grad());
  EXPECT_DOUBLE_EQ(x.grad()[0], 2);
}
