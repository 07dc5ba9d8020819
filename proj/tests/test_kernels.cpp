#include <gtest/gtest.h>

#include <vector>

#include "oracles.hpp"
#include "tsg/kernels.hpp"

using namespace tsg;

namespace {

std::vector<Real> rand_vec(std::size_t n, std::uint64_t seed) {
  const CounterRng rng(seed);
  std::vector<Real> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = Real(rng.uniform(0, i, -1, 1));
  return v;
}

using Gemm = void (*)(const Real*, const Real*, Real*, std::size_t, std::size_t, std::size_t, bool);

struct Shape3 {
  std::size_t m, k, p;
};

const std::vector<Shape3> kShapes{{1, 1, 1}, {3, 5, 7}, {17, 33, 9}, {64, 64, 64}, {256, 32, 129}, {200, 300, 2}};

void compare(Gemm fast, Gemm ref, std::size_t a_rows_for_tn) {
  for (const auto& [m, k, p] : kShapes) {
    (void)a_rows_for_tn;
    const auto a = rand_vec(m * k, m * 7 + k), b = rand_vec(k * p, p * 13 + k);
    for (bool acc : {false, true}) {
      std::vector<Real> c1 = rand_vec(m * p, 5), c2 = c1;
      fast(a.data(), b.data(), c1.data(), m, k, p, acc);
      ref(a.data(), b.data(), c2.data(), m, k, p, acc);
      for (std::size_t i = 0; i < c1.size(); ++i) ASSERT_NEAR(c1[i], c2[i], 1e-12 * double(k)) << m << "x" << k << "x" << p;
    }
  }
}

}  // namespace

TEST(Kernels, ParallelMatchesSerialReference) {
  compare(kernels::gemm_nn, kernels::serial::gemm_nn, 0);
  compare(kernels::gemm_nt, kernels::serial::gemm_nt, 0);
  compare(kernels::gemm_tn, kernels::serial::gemm_tn, 0);
}

TEST(Kernels, SerialReferenceMatchesLoopOracle) {
  const std::size_t m = 4, k = 3, p = 5;
  const auto a = rand_vec(m * k, 1), b = rand_vec(k * p, 2);
  std::vector<Real> c(m * p);
  kernels::serial::gemm_nn(a.data(), b.data(), c.data(), m, k, p, false);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0;
      for (std::size_t q = 0; q < k; ++q) s += a[i * k + q] * b[q * p + j];
      EXPECT_NEAR(c[i * p + j], s, 1e-14);
    }
}

TEST(Kernels, ResultsIndependentOfThreadCount) {
  const std::size_t m = 300, k = 128, p = 96;
  const auto a = rand_vec(m * k, 3), b = rand_vec(k * p, 4), bt = rand_vec(p * k, 5), at = rand_vec(k * m, 6);
  const int before = kernels::max_threads();
  std::vector<std::vector<Real>> runs;
  for (int threads : {1, 2, 3, 4}) {
    kernels::set_threads(threads);
    std::vector<Real> c(m * p * 3);
    kernels::gemm_nn(a.data(), b.data(), c.data(), m, k, p, false);
    kernels::gemm_nt(a.data(), bt.data(), c.data() + m * p, m, k, p, false);
    kernels::gemm_tn(at.data(), b.data(), c.data() + 2 * m * p, m, k, p, false);
    runs.push_back(c);
  }
  kernels::set_threads(before);
  for (std::size_t r = 1; r < runs.size(); ++r) EXPECT_EQ(runs[r], runs[0]);
}

TEST(Kernels, NanPropagates) {
  std::vector<Real> a{0, 1}, b{std::numeric_limits<Real>::quiet_NaN(), 1}, c(1);
  // a is 2x1 transposed to 1x2; its zero entry multiplies the NaN.
  kernels::gemm_tn(a.data(), b.data(), c.data(), 1, 2, 1, false);
  EXPECT_TRUE(std::isnan(c[0]));
}
