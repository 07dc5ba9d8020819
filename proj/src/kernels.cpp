#include "tsg/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tsg::kernels {

namespace {
// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

bool go_parallel(std::size_t m, std::size_t k, std::size_t p) { return m > 1 && m * k * p >= kParallelWork; }
}  // namespace

void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m, k, p))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    Real* crow = c + static_cast<std::size_t>(i) * p;
    if (!accumulate) std::fill(crow, crow + p, Real(0));
    const Real* arow = a + static_cast<std::size_t>(i) * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const Real av = arow[kk];
      const Real* brow = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate) {
  // Transpose b once so the inner loop streams contiguous rows.
  std::vector<Real> bt(k * p);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t kk = 0; kk < k; ++kk) bt[kk * p + j] = b[j * k + kk];
  }
  gemm_nn(a, bt.data(), c, m, k, p, accumulate);
}

void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m, k, p))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    Real* crow = c + static_cast<std::size_t>(i) * p;
    if (!accumulate) std::fill(crow, crow + p, Real(0));
    for (std::size_t kk = 0; kk < k; ++kk) {
      const Real av = a[kk * m + static_cast<std::size_t>(i)];
      const Real* brow = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

namespace serial {

void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      Real acc = accumulate ? c[i * p + j] : Real(0);
      for (std::size_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[kk * p + j];
      c[i * p + j] = acc;
    }
  }
}

void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      Real acc = accumulate ? c[i * p + j] : Real(0);
      for (std::size_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[j * k + kk];
      c[i * p + j] = acc;
    }
  }
}

void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      Real acc = accumulate ? c[i * p + j] : Real(0);
      for (std::size_t kk = 0; kk < k; ++kk) acc += a[kk * m + i] * b[kk * p + j];
      c[i * p + j] = acc;
    }
  }
}

}  // namespace serial

}  // namespace tsg::kernels
