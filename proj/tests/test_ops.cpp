#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "tsg/ops.hpp"

using namespace tsg;
using oracle::random_tensor;

namespace {

// Weighted sum so every output element gets a distinct upstream gradient.
Tensor probe(const Tensor& y, std::uint64_t seed = 99) {
  return sum(mul(y, random_tensor(y.shape(), seed, -1, 1)));
}

void expect_grad(const std::function<Tensor()>& f, std::vector<Tensor> inputs) {
  const auto r = gradcheck::check(f, std::move(inputs));
  EXPECT_TRUE(r.ok) << r.detail << " (score " << r.worst << ")";
}

}  // namespace

TEST(Ops, MatmulMatchesOracle) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Tensor a = random_tensor({3 + s, 4}, s), b = random_tensor({4, 2 + s}, s + 50);
    EXPECT_LT(oracle::max_abs_diff(oracle::matmul(oracle::of(a), oracle::of(b)), matmul(a, b)), 1e-12);
    const Tensor bt = random_tensor({2 + s, 4}, s + 80);
    EXPECT_LT(oracle::max_abs_diff(oracle::matmul(oracle::of(a), oracle::transpose(oracle::of(bt))), matmul_nt(a, bt)),
              1e-12);
  }
  EXPECT_THROW(matmul(random_tensor({2, 3}, 1), random_tensor({2, 3}, 2)), ShapeError);
}

TEST(Ops, MatmulGradients) {
  const Tensor a = random_tensor({3, 4}, 1, -1, 1, true), b = random_tensor({4, 5}, 2, -1, 1, true);
  const Tensor c = random_tensor({5, 4}, 3, -1, 1, true);
  expect_grad([&] { return probe(matmul(a, b)); }, {a, b});
  expect_grad([&] { return probe(matmul_nt(a, c)); }, {a, c});
  expect_grad([&] { return probe(transpose(a)); }, {a});
}

TEST(Ops, LinearAndElementwiseGradients) {
  const Tensor x = random_tensor({4, 3}, 4, -1, 1, true), w = random_tensor({3, 2}, 5, -1, 1, true);
  const Tensor b = random_tensor({2}, 6, -1, 1, true), y = random_tensor({4, 3}, 7, -1, 1, true);
  expect_grad([&] { return probe(linear(x, w, b)); }, {x, w, b});
  expect_grad([&] { return probe(add(x, y)); }, {x, y});
  expect_grad([&] { return probe(sub(x, y)); }, {x, y});
  expect_grad([&] { return probe(mul(x, y)); }, {x, y});
  expect_grad([&] { return probe(scale(x, -2.5)); }, {x});
  const std::vector<Tensor> terms{x, y, x};
  expect_grad([&] { return probe(add_n(terms)); }, {x, y});
}

TEST(Ops, ScaleRowsAcceptsVectorOrColumn) {
  const Tensor x = random_tensor({3, 2}, 8, -1, 1, true);
  const Tensor w = random_tensor({3}, 9, -1, 1, true), wc = random_tensor({3, 1}, 10, -1, 1, true);
  const Tensor y = scale_rows(x, w);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(y[i * 2 + j], x[i * 2 + j] * w[i]);
  expect_grad([&] { return probe(scale_rows(x, w)); }, {x, w});
  expect_grad([&] { return probe(scale_rows(x, wc)); }, {x, wc});
  EXPECT_THROW(scale_rows(x, random_tensor({2}, 1)), ShapeError);
}

TEST(Ops, GeluUsesExactErf) {
  EXPECT_NEAR(gelu_value(1.0), 0.8413447460685429, 1e-12);
  EXPECT_NEAR(gelu_value(-1.0), -0.15865525393145707, 1e-12);
  EXPECT_EQ(gelu_value(0.0), 0.0);
  const Tensor x = random_tensor({5, 3}, 11, -3, 3, true);
  const Tensor y = gelu(x);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y[i], oracle::gelu(x[i]), 1e-14);
  expect_grad([&] { return probe(gelu(x)); }, {x});
}

TEST(Ops, SoftmaxBothAxes) {
  const Tensor x = random_tensor({4, 5}, 12, -4, 4, true);
  const oracle::Mat m = oracle::of(x);
  EXPECT_LT(oracle::max_abs_diff(oracle::softmax_rows(m), softmax(x, 1)), 1e-15);
  EXPECT_LT(oracle::max_abs_diff(oracle::softmax_cols(m), softmax(x, 0)), 1e-15);
  expect_grad([&] { return probe(softmax(x, 1)); }, {x});
  expect_grad([&] { return probe(softmax(x, 0)); }, {x});
  EXPECT_THROW(softmax(x, 2), ShapeError);
}

TEST(Ops, SoftmaxIsShiftInvariantAndStable) {
  const Tensor x = Tensor::from_data({1, 3}, {1000, 1001, 1002});
  const Tensor y = softmax(x, 1);
  const Tensor z = softmax(Tensor::from_data({1, 3}, {0, 1, 2}), 1);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y[i], z[i], 1e-15);
}

TEST(Ops, LayerNorm) {
  const Tensor x = random_tensor({4, 6}, 13, -2, 2, true);
  const Tensor g = random_tensor({6}, 14, 0.5, 1.5, true), b = random_tensor({6}, 15, -1, 1, true);
  EXPECT_LT(oracle::max_abs_diff(oracle::layernorm(oracle::of(x), g, b), layernorm(x, g, b)), 1e-13);
  expect_grad([&] { return probe(layernorm(x, g, b)); }, {x, g, b});
  // A constant row normalizes to beta.
  const Tensor c = Tensor::full({1, 6}, 3.0);
  const Tensor y = layernorm(c, g, b);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(y[j], b[j], 1e-12);
}

TEST(Ops, ConcatNarrowReshapeIndex) {
  const Tensor a = random_tensor({3, 2}, 16, -1, 1, true), b = random_tensor({3, 4}, 17, -1, 1, true);
  const std::vector<Tensor> parts{a, b};
  const Tensor c = concat(parts, 1);
  EXPECT_EQ(c.shape(), (Shape{3, 6}));
  EXPECT_EQ(c[1 * 6 + 3], b[1 * 4 + 1]);
  const Tensor r = concat(std::vector<Tensor>{a, a}, 0);
  EXPECT_EQ(r.shape(), (Shape{6, 2}));
  expect_grad([&] { return probe(concat(parts, 1)); }, {a, b});
  expect_grad([&] { return probe(concat(std::vector<Tensor>{a, a}, 0)); }, {a});
  const Tensor n = narrow(b, 1, 1, 2);
  EXPECT_EQ(n[2 * 2 + 1], b[2 * 4 + 2]);
  expect_grad([&] { return probe(narrow(b, 1, 1, 2)); }, {b});
  expect_grad([&] { return probe(narrow(b, 0, 1, 2)); }, {b});
  EXPECT_THROW(narrow(b, 1, 3, 2), ShapeError);
  expect_grad([&] { return probe(reshape(b, {2, 6})); }, {b});
  EXPECT_THROW(reshape(b, {5, 2}), ShapeError);
  const std::vector<std::size_t> rows{2, 0, 2};
  const Tensor ix = index_rows(b, rows);
  EXPECT_EQ(ix[2 * 4 + 3], b[2 * 4 + 3]);
  expect_grad([&] { return probe(index_rows(b, rows)); }, {b});
}

TEST(Ops, BilinearMatchesOracle) {
  for (std::uint64_t s = 0; s < 6; ++s) {
    const SpatialSize from{1 + s % 3, 2 + s % 2}, to{from.h * (1 + s % 2) + s % 2, from.w * 2};
    const Tensor x = random_tensor({from.count(), 3}, 20 + s, -1, 1, true);
    EXPECT_LT(oracle::max_abs_diff(oracle::bilinear(oracle::of(x), from, to), upsample_bilinear(x, from, to)), 1e-14);
    expect_grad([&] { return probe(upsample_bilinear(x, from, to)); }, {x});
  }
}

TEST(Ops, BilinearKnownValues) {
  // 1-D 2 -> 4 with half-pixel centres: 1, 1.25, 1.75, 2
  const Tensor x = Tensor::from_data({2, 1}, {1, 2});
  const Tensor y = upsample_bilinear(x, {1, 2}, {1, 4});
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_DOUBLE_EQ(y[1], 1.25);
  EXPECT_DOUBLE_EQ(y[2], 1.75);
  EXPECT_DOUBLE_EQ(y[3], 2.0);
  EXPECT_THROW(upsample_bilinear(y, {1, 4}, {1, 2}), ShapeError);
  const Tensor same = upsample_bilinear(x, {1, 2}, {1, 2});
  EXPECT_EQ(same[1], 2);
}

TEST(Ops, SumMeanCrossEntropy) {
  const Tensor x = random_tensor({4, 3}, 30, -2, 2, true);
  EXPECT_NEAR(sum(x).item(), [&] { double s = 0; for (Real v : x.data()) s += v; return s; }(), 1e-14);
  expect_grad([&] { return mean(x); }, {x});
  const std::vector<int> labels{0, 2, -1, 1};
  double ref = 0;
  const oracle::Mat p = oracle::softmax_rows(oracle::of(x));
  for (std::size_t i : {0u, 1u, 3u}) ref -= std::log(p(i, static_cast<std::size_t>(labels[i])));
  EXPECT_NEAR(cross_entropy(x, labels).item(), ref / 3, 1e-14);
  expect_grad([&] { return cross_entropy(x, labels); }, {x});
  const std::vector<int> ignored(4, -1);
  EXPECT_THROW(cross_entropy(x, ignored), Error);
  const std::vector<int> bad{0, 3, 0, 0};
  EXPECT_THROW(cross_entropy(x, bad), Error);
}
