#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tsg/tensor.hpp"

namespace tsg {

/// Row/column grid of a flattened spatial tensor (rows = h·w, row-major).
struct SpatialSize {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t count() const { return h * w; }
  bool operator==(const SpatialSize&) const = default;
};

// --- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // [m×k]·[k×p]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m×k]·[p×k]ᵀ
Tensor transpose(const Tensor& a);                   // 2-D only
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // x·w + b (b broadcast over rows)

// --- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real s);
Tensor add_n(std::span<const Tensor> terms);  // elementwise sum of equally shaped tensors
// x[n×d] with row n multiplied by w[n] (w shaped [n] or [n×1]).
Tensor scale_rows(const Tensor& x, const Tensor& w);

/// Exact erf form 0.5·x·(1 + erf(x/√2)); used everywhere in the project.
Tensor gelu(const Tensor& x);
Real gelu_value(Real x);

// --- normalization --------------------------------------------------------

// Numerically stable (max-subtracted) softmax along `axis` of an n-D tensor.
Tensor softmax(const Tensor& x, std::size_t axis);
// Row-wise layer normalization over the last axis of [n×d].
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps = Real(1e-5));

// --- shape ----------------------------------------------------------------

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& x, Shape shape);
// Gathers rows of a 2-D tensor; backward scatter-adds.
Tensor index_rows(const Tensor& x, std::span<const std::size_t> rows);

/// Channelwise bilinear upsampling of x[(h·w)×c] from `from` to `to`,
/// align_corners=false. Downsampling is rejected.
Tensor upsample_bilinear(const Tensor& x, SpatialSize from, SpatialSize to);

// --- reductions / loss ----------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean negative log-softmax of the true class over rows whose label is not
/// `ignore_index`. Throws when every row is ignored.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels, int ignore_index = -1);

}  // namespace tsg
