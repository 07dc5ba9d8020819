#include "tsg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <string>

#include "tsg/kernels.hpp"

namespace tsg {

namespace {

using detail::Node;
using BackwardFn = std::function<void(Node&)>;

Tensor make_op(Shape shape, std::vector<Real> data, std::initializer_list<const Tensor*> inputs, BackwardFn fn) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data));
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  if (!needs) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const Tensor* t : inputs) node.parents.push_back(t->node());
  node.backward = std::move(fn);
  return out;
}

Tensor make_op_n(Shape shape, std::vector<Real> data, std::span<const Tensor> inputs, BackwardFn fn) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data));
  if (!grad_enabled()) return out;
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const Tensor& t : inputs) node.parents.push_back(t.node());
  node.backward = std::move(fn);
  return out;
}

// Parent i's grad buffer, or nullptr when it does not take gradients.
Real* grad_of(Node& out, std::size_t i) {
  Node& p = *out.parents[i];
  return p.requires_grad ? p.ensure_grad() : nullptr;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

// --- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<Real> out(m * p);
  kernels::gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, p, false);
  return make_op({m, p}, std::move(out), {&a, &b}, [m, k, p](Node& o) {
    const Real* dc = o.grad.data();
    if (Real* da = grad_of(o, 0)) kernels::gemm_nt(dc, o.parents[1]->data.data(), da, m, p, k, true);
    if (Real* db = grad_of(o, 1)) kernels::gemm_tn(o.parents[0]->data.data(), dc, db, k, m, p, true);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(0);
  if (b.dim(1) != k) {
    throw ShapeError("matmul_nt: inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                     "^T");
  }
  std::vector<Real> out(m * p);
  kernels::gemm_nt(a.data().data(), b.data().data(), out.data(), m, k, p, false);
  return make_op({m, p}, std::move(out), {&a, &b}, [m, k, p](Node& o) {
    const Real* dc = o.grad.data();
    if (Real* da = grad_of(o, 0)) kernels::gemm_nn(dc, o.parents[1]->data.data(), da, m, p, k, true);
    if (Real* db = grad_of(o, 1)) kernels::gemm_tn(dc, o.parents[0]->data.data(), db, p, m, k, true);
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  const auto src = a.data();
  std::vector<Real> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = src[i * c + j];
  }
  return make_op({c, r}, std::move(out), {&a}, [r, c](Node& o) {
    Real* da = grad_of(o, 0);
    if (!da) return;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) da[i * c + j] += o.grad[j * r + i];
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const std::size_t n = x.dim(0), din = x.dim(1), dout = w.dim(1);
  if (w.dim(0) != din || b.numel() != dout) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " + shape_str(w.shape()) +
                     " and bias " + shape_str(b.shape()));
  }
  std::vector<Real> out(n * dout);
  kernels::gemm_nn(x.data().data(), w.data().data(), out.data(), n, din, dout, false);
  const auto bias = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dout; ++j) out[i * dout + j] += bias[j];
  }
  return make_op({n, dout}, std::move(out), {&x, &w, &b}, [n, din, dout](Node& o) {
    const Real* dy = o.grad.data();
    if (Real* dx = grad_of(o, 0)) kernels::gemm_nt(dy, o.parents[1]->data.data(), dx, n, dout, din, true);
    if (Real* dw = grad_of(o, 1)) kernels::gemm_tn(o.parents[0]->data.data(), dy, dw, din, n, dout, true);
    if (Real* db = grad_of(o, 2)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dout; ++j) db[j] += dy[i * dout + j];
      }
    }
  });
}

// --- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  const auto x = a.data(), y = b.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_op(a.shape(), std::move(out), {&a, &b}, [](Node& o) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (Real* d = grad_of(o, p)) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) d[i] += o.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  const auto x = a.data(), y = b.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_op(a.shape(), std::move(out), {&a, &b}, [](Node& o) {
    if (Real* d = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) d[i] += o.grad[i];
    }
    if (Real* d = grad_of(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) d[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  const auto x = a.data(), y = b.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_op(a.shape(), std::move(out), {&a, &b}, [](Node& o) {
    const auto& xa = o.parents[0]->data;
    const auto& xb = o.parents[1]->data;
    if (Real* d = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) d[i] += o.grad[i] * xb[i];
    }
    if (Real* d = grad_of(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) d[i] += o.grad[i] * xa[i];
    }
  });
}

Tensor scale(const Tensor& a, Real s) {
  const auto x = a.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s;
  return make_op(a.shape(), std::move(out), {&a}, [s](Node& o) {
    if (Real* d = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) d[i] += o.grad[i] * s;
    }
  });
}

Tensor add_n(std::span<const Tensor> terms) {
  if (terms.empty()) throw ShapeError("add_n: no inputs");
  for (const Tensor& t : terms) require_same(terms.front(), t, "add_n");
  std::vector<Real> out(terms.front().data().begin(), terms.front().data().end());
  for (std::size_t t = 1; t < terms.size(); ++t) {
    const auto x = terms[t].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
  }
  return make_op_n(terms.front().shape(), std::move(out), terms, [](Node& o) {
    for (std::size_t p = 0; p < o.parents.size(); ++p) {
      if (Real* d = grad_of(o, p)) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) d[i] += o.grad[i];
      }
    }
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  require_rank(x, 2, "scale_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (w.numel() != n || (w.rank() == 2 && w.dim(1) != 1) || w.rank() > 2) {
    throw ShapeError("scale_rows: weights " + shape_str(w.shape()) + " do not match rows of " + shape_str(x.shape()));
  }
  const auto xs = x.data(), ws = w.data();
  std::vector<Real> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xs[i * d + j] * ws[i];
  }
  return make_op({n, d}, std::move(out), {&x, &w}, [n, d](Node& o) {
    const auto& xv = o.parents[0]->data;
    const auto& wv = o.parents[1]->data;
    if (Real* dx = grad_of(o, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) dx[i * d + j] += o.grad[i * d + j] * wv[i];
      }
    }
    if (Real* dw = grad_of(o, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        Real acc = 0;
        for (std::size_t j = 0; j < d; ++j) acc += o.grad[i * d + j] * xv[i * d + j];
        dw[i] += acc;
      }
    }
  });
}

Real gelu_value(Real x) { return Real(0.5) * x * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>)); }

Tensor gelu(const Tensor& x) {
  const auto xs = x.data();
  std::vector<Real> out(xs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_value(xs[i]);
  return make_op(x.shape(), std::move(out), {&x}, [](Node& o) {
    Real* dx = grad_of(o, 0);
    if (!dx) return;
    const auto& xv = o.parents[0]->data;
    const Real inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<Real> / std::numbers::sqrt2_v<Real>;
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const Real v = xv[i];
      const Real cdf = Real(0.5) * (Real(1) + std::erf(v / std::numbers::sqrt2_v<Real>));
      const Real pdf = inv_sqrt_2pi * std::exp(Real(-0.5) * v * v);
      dx[i] += o.grad[i] * (cdf + v * pdf);
    }
  });
}

// --- normalization --------------------------------------------------------

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  const auto xs = x.data();
  std::vector<Real> out(xs.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, xs[base + l * s.inner]);
      Real total = 0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const Real e = std::exp(xs[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= total;
    }
  }
  return make_op(x.shape(), std::move(out), {&x}, [s](Node& o) {
    Real* dx = grad_of(o, 0);
    if (!dx) return;
    const auto& y = o.data;
    const auto& dy = o.grad;
    for (std::size_t ou = 0; ou < s.outer; ++ou) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = ou * s.len * s.inner + in;
        Real dot = 0;
        for (std::size_t l = 0; l < s.len; ++l) dot += dy[base + l * s.inner] * y[base + l * s.inner];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t idx = base + l * s.inner;
          dx[idx] += y[idx] * (dy[idx] - dot);
        }
      }
    }
  });
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps) {
  require_rank(x, 2, "layernorm");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (gamma.numel() != d || beta.numel() != d) {
    throw ShapeError("layernorm: affine parameters " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                     " do not match feature width " + std::to_string(d));
  }
  if (!(eps > 0)) throw Error("layernorm: eps must be positive");
  const auto xs = x.data(), g = gamma.data(), b = beta.data();
  std::vector<Real> out(n * d);
  std::vector<Real> xhat(n * d);
  std::vector<Real> rstd(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real* row = xs.data() + i * d;
    Real mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= Real(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= Real(d);
    rstd[i] = Real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mu) * rstd[i];
      out[i * d + j] = xhat[i * d + j] * g[j] + b[j];
    }
  }
  return make_op({n, d}, std::move(out), {&x, &gamma, &beta},
                 [n, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node& o) {
                   const auto& dy = o.grad;
                   const auto& gv = o.parents[1]->data;
                   if (Real* dx = grad_of(o, 0)) {
                     for (std::size_t i = 0; i < n; ++i) {
                       Real m1 = 0, m2 = 0;
                       for (std::size_t j = 0; j < d; ++j) {
                         const Real dxh = dy[i * d + j] * gv[j];
                         m1 += dxh;
                         m2 += dxh * xhat[i * d + j];
                       }
                       m1 /= Real(d);
                       m2 /= Real(d);
                       for (std::size_t j = 0; j < d; ++j) {
                         const Real dxh = dy[i * d + j] * gv[j];
                         dx[i * d + j] += rstd[i] * (dxh - m1 - xhat[i * d + j] * m2);
                       }
                     }
                   }
                   if (Real* dg = grad_of(o, 1)) {
                     for (std::size_t i = 0; i < n; ++i) {
                       for (std::size_t j = 0; j < d; ++j) dg[j] += dy[i * d + j] * xhat[i * d + j];
                     }
                   }
                   if (Real* db = grad_of(o, 2)) {
                     for (std::size_t i = 0; i < n; ++i) {
                       for (std::size_t j = 0; j < d; ++j) db[j] += dy[i * d + j];
                     }
                   }
                 });
}

// --- shape ----------------------------------------------------------------

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis " + std::to_string(axis) + " invalid for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw ShapeError("concat: incompatible shapes " + shape_str(first) + " and " + shape_str(s));
    out_shape[axis] += s[axis];
  }
  const AxisSplit whole = split_at(out_shape, axis);
  std::vector<std::size_t> offsets;  // per part, start along axis
  std::vector<Real> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (const Tensor& t : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = t.dim(axis) * whole.inner;
    const auto src = t.data();
    for (std::size_t o = 0; o < whole.outer; ++o) {
      std::copy_n(src.data() + o * chunk, chunk, out.data() + o * whole.len * whole.inner + offset * whole.inner);
    }
    offset += t.dim(axis);
  }
  return make_op_n(out_shape, std::move(out), parts, [whole, offsets, axis](Node& o) {
    for (std::size_t p = 0; p < o.parents.size(); ++p) {
      Real* d = grad_of(o, p);
      if (!d) continue;
      const std::size_t chunk = o.parents[p]->shape[axis] * whole.inner;
      for (std::size_t ou = 0; ou < whole.outer; ++ou) {
        const Real* src = o.grad.data() + ou * whole.len * whole.inner + offsets[p] * whole.inner;
        for (std::size_t i = 0; i < chunk; ++i) d[ou * chunk + i] += src[i];
      }
    }
  });
}

Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis]) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") invalid on axis " + std::to_string(axis) + " of " + shape_str(s));
  }
  const AxisSplit whole = split_at(s, axis);
  Shape out_shape = s;
  out_shape[axis] = length;
  const std::size_t chunk = length * whole.inner;
  const auto src = x.data();
  std::vector<Real> out(whole.outer * chunk);
  for (std::size_t o = 0; o < whole.outer; ++o) {
    std::copy_n(src.data() + o * whole.len * whole.inner + start * whole.inner, chunk, out.data() + o * chunk);
  }
  return make_op(out_shape, std::move(out), {&x}, [whole, chunk, start](Node& o) {
    Real* d = grad_of(o, 0);
    if (!d) return;
    for (std::size_t ou = 0; ou < whole.outer; ++ou) {
      Real* dst = d + ou * whole.len * whole.inner + start * whole.inner;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += o.grad[ou * chunk + i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  return make_op(std::move(shape), std::move(out), {&x}, [](Node& o) {
    if (Real* d = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) d[i] += o.grad[i];
    }
  });
}

Tensor index_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_rank(x, 2, "index_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (rows.empty()) throw ShapeError("index_rows: empty index list");
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const auto src = x.data();
  std::vector<Real> out(idx.size() * d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n) throw ShapeError("index_rows: row " + std::to_string(idx[r]) + " out of range " + std::to_string(n));
    std::copy_n(src.data() + idx[r] * d, d, out.data() + r * d);
  }
  const std::size_t count = idx.size();
  return make_op({count, d}, std::move(out), {&x}, [d, idx = std::move(idx)](Node& o) {
    Real* dx = grad_of(o, 0);
    if (!dx) return;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t j = 0; j < d; ++j) dx[idx[r] * d + j] += o.grad[r * d + j];
    }
  });
}

namespace {

// Source taps of one output coordinate under align_corners=false.
struct Taps {
  std::size_t i0, i1;
  Real w0, w1;
};

std::vector<Taps> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Taps> taps(out);
  const Real ratio = Real(in) / Real(out);
  for (std::size_t o = 0; o < out; ++o) {
    Real src = (Real(o) + Real(0.5)) * ratio - Real(0.5);
    if (src < 0) src = 0;
    auto i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = i0 + (i0 < in - 1 ? 1 : 0);
    const Real l1 = src - Real(i0);
    taps[o] = {i0, i1, Real(1) - l1, l1};
  }
  return taps;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& x, SpatialSize from, SpatialSize to) {
  require_rank(x, 2, "upsample_bilinear");
  if (x.dim(0) != from.count()) {
    throw ShapeError("upsample_bilinear: " + shape_str(x.shape()) + " rows do not match grid " +
                     std::to_string(from.h) + "x" + std::to_string(from.w));
  }
  if (to.h < from.h || to.w < from.w) {
    throw ShapeError("upsample_bilinear: downsampling " + std::to_string(from.h) + "x" + std::to_string(from.w) +
                     " -> " + std::to_string(to.h) + "x" + std::to_string(to.w) + " is not supported");
  }
  if (to == from) {
    return reshape(x, x.shape());
  }
  const std::size_t c = x.dim(1);
  const auto ty = bilinear_taps(from.h, to.h);
  const auto tx = bilinear_taps(from.w, to.w);
  const auto src = x.data();
  std::vector<Real> out(to.count() * c, Real(0));
  for (std::size_t oy = 0; oy < to.h; ++oy) {
    for (std::size_t ox = 0; ox < to.w; ++ox) {
      Real* dst = out.data() + (oy * to.w + ox) * c;
      const Real* r00 = src.data() + (ty[oy].i0 * from.w + tx[ox].i0) * c;
      const Real* r01 = src.data() + (ty[oy].i0 * from.w + tx[ox].i1) * c;
      const Real* r10 = src.data() + (ty[oy].i1 * from.w + tx[ox].i0) * c;
      const Real* r11 = src.data() + (ty[oy].i1 * from.w + tx[ox].i1) * c;
      const Real w00 = ty[oy].w0 * tx[ox].w0, w01 = ty[oy].w0 * tx[ox].w1;
      const Real w10 = ty[oy].w1 * tx[ox].w0, w11 = ty[oy].w1 * tx[ox].w1;
      for (std::size_t j = 0; j < c; ++j) dst[j] = w00 * r00[j] + w01 * r01[j] + w10 * r10[j] + w11 * r11[j];
    }
  }
  return make_op({to.count(), c}, std::move(out), {&x}, [from, to, c, ty, tx](Node& o) {
    Real* dx = grad_of(o, 0);
    if (!dx) return;
    for (std::size_t oy = 0; oy < to.h; ++oy) {
      for (std::size_t ox = 0; ox < to.w; ++ox) {
        const Real* g = o.grad.data() + (oy * to.w + ox) * c;
        Real* d00 = dx + (ty[oy].i0 * from.w + tx[ox].i0) * c;
        Real* d01 = dx + (ty[oy].i0 * from.w + tx[ox].i1) * c;
        Real* d10 = dx + (ty[oy].i1 * from.w + tx[ox].i0) * c;
        Real* d11 = dx + (ty[oy].i1 * from.w + tx[ox].i1) * c;
        const Real w00 = ty[oy].w0 * tx[ox].w0, w01 = ty[oy].w0 * tx[ox].w1;
        const Real w10 = ty[oy].w1 * tx[ox].w0, w11 = ty[oy].w1 * tx[ox].w1;
        for (std::size_t j = 0; j < c; ++j) {
          d00[j] += w00 * g[j];
          d01[j] += w01 * g[j];
          d10[j] += w10 * g[j];
          d11[j] += w11 * g[j];
        }
      }
    }
  });
}

// --- reductions / loss ----------------------------------------------------

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  return make_op({1}, {total}, {&x}, [](Node& o) {
    if (Real* d = grad_of(o, 0)) {
      const std::size_t n = o.parents[0]->data.size();
      for (std::size_t i = 0; i < n; ++i) d[i] += o.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), Real(1) / Real(x.numel())); }

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels, int ignore_index) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
  }
  std::vector<int> lab(labels.begin(), labels.end());
  std::size_t valid = 0;
  for (int l : lab) {
    if (l == ignore_index) continue;
    if (l < 0 || static_cast<std::size_t>(l) >= c) {
      throw Error("cross_entropy: label " + std::to_string(l) + " outside [0, " + std::to_string(c) + ")");
    }
    ++valid;
  }
  if (valid == 0) throw Error("cross_entropy: empty loss (every position ignored)");

  const auto z = logits.data();
  std::vector<Real> prob(n * c);
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real* row = z.data() + i * c;
    const Real mx = *std::max_element(row, row + c);
    Real se = 0;
    for (std::size_t j = 0; j < c; ++j) se += std::exp(row[j] - mx);
    const Real lse = mx + std::log(se);
    for (std::size_t j = 0; j < c; ++j) prob[i * c + j] = std::exp(row[j] - lse);
    if (lab[i] != ignore_index) total += lse - row[lab[i]];
  }
  const Real inv = Real(1) / Real(valid);
  return make_op({1}, {total * inv}, {&logits},
                 [n, c, inv, ignore_index, lab = std::move(lab), prob = std::move(prob)](Node& o) {
                   Real* d = grad_of(o, 0);
                   if (!d) return;
                   const Real g = o.grad[0] * inv;
                   for (std::size_t i = 0; i < n; ++i) {
                     if (lab[i] == ignore_index) continue;
                     for (std::size_t j = 0; j < c; ++j) d[i * c + j] += g * prob[i * c + j];
                     d[i * c + static_cast<std::size_t>(lab[i])] -= g;
                   }
                 });
}

}  // namespace tsg
