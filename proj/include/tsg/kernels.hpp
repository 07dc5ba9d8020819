#pragma once

#include <cstddef>

#include "tsg/tensor.hpp"

// Dense GEMM kernels used by the autograd ops.
//
// The parallel kernels split work over output rows only; every output element
// is reduced over k in ascending order by exactly one thread, so results do
// not depend on the thread count. The serial namespace keeps plain triple-loop
// references for tests and the benchmark.
namespace tsg::kernels {

// c[m×p] (+)= a[m×k] · b[k×p]
void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate);
// c[m×p] (+)= a[m×k] · b[p×k]ᵀ
void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate);
// c[m×p] (+)= a[k×m]ᵀ · b[k×p]
void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate);

int max_threads();
void set_threads(int n);

namespace serial {
void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate);
void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate);
void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t p, bool accumulate);
}  // namespace serial

}  // namespace tsg::kernels
