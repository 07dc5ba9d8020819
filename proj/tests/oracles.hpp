#pragma once

// Plain loop reference implementations. They share no code with the library
// beyond reading parameter values, so agreement is meaningful.

#include <cmath>
#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "tsg/attention.hpp"
#include "tsg/decoder.hpp"
#include "tsg/encoder.hpp"
#include "tsg/rng.hpp"
#include "tsg/scale_gate.hpp"
#include "tsg/tensor.hpp"

namespace oracle {

struct Mat {
  std::size_t r = 0, c = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0) : r(rows), c(cols), v(rows * cols, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return v[i * c + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v[i * c + j]; }
};

// 1-D tensors become a single row.
inline Mat of(const tsg::Tensor& t) {
  Mat m(t.rank() == 1 ? 1 : t.dim(0), t.rank() == 1 ? t.dim(0) : t.numel() / t.dim(0));
  for (std::size_t i = 0; i < t.numel(); ++i) m.v[i] = double(t[i]);
  return m;
}

inline double max_abs_diff(const Mat& a, const tsg::Tensor& b) {
  if (a.v.size() != b.numel()) return INFINITY;
  double d = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) d = std::max(d, std::abs(a.v[i] - double(b[i])));
  return d;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  if (a.r != b.r || a.c != b.c) return INFINITY;
  double d = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) d = std::max(d, std::abs(a.v[i] - b.v[i]));
  return d;
}

inline tsg::Tensor random_tensor(tsg::Shape shape, std::uint64_t seed, double lo = -1, double hi = 1,
                                 bool requires_grad = false) {
  const tsg::CounterRng rng(seed);
  std::vector<tsg::Real> v(tsg::shape_numel(shape));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = tsg::Real(rng.uniform(7, i, lo, hi));
  return tsg::Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

// Overwrites a parameter with random values, so zero-initialized biases are exercised too.
inline void randomize(tsg::Tensor t, std::uint64_t seed, double scale = 0.5) {
  const tsg::CounterRng rng(seed);
  auto d = t.mutable_data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = tsg::Real(rng.uniform(3, i, -scale, scale));
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat o(a.r, b.c);
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < b.c; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.c; ++k) s += a(i, k) * b(k, j);
      o(i, j) = s;
    }
  return o;
}

inline Mat transpose(const Mat& a) {
  Mat o(a.c, a.r);
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < a.c; ++j) o(j, i) = a(i, j);
  return o;
}

inline Mat linear(const Mat& x, const tsg::Tensor& w, const tsg::Tensor& b) {
  Mat o = matmul(x, of(w));
  if (b.defined()) {
    for (std::size_t i = 0; i < o.r; ++i)
      for (std::size_t j = 0; j < o.c; ++j) o(i, j) += double(b[j]);
  }
  return o;
}

inline Mat add(const Mat& a, const Mat& b) {
  Mat o = a;
  for (std::size_t i = 0; i < o.v.size(); ++i) o.v[i] += b.v[i];
  return o;
}

inline Mat softmax_rows(const Mat& a) {
  Mat o(a.r, a.c);
  for (std::size_t i = 0; i < a.r; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < a.c; ++j) mx = std::max(mx, a(i, j));
    double z = 0;
    for (std::size_t j = 0; j < a.c; ++j) z += std::exp(a(i, j) - mx);
    for (std::size_t j = 0; j < a.c; ++j) o(i, j) = std::exp(a(i, j) - mx) / z;
  }
  return o;
}

inline Mat softmax_cols(const Mat& a) { return transpose(softmax_rows(transpose(a))); }

inline Mat layernorm(const Mat& x, const tsg::Tensor& g, const tsg::Tensor& b, double eps = 1e-5) {
  Mat o(x.r, x.c);
  for (std::size_t i = 0; i < x.r; ++i) {
    double mu = 0;
    for (std::size_t j = 0; j < x.c; ++j) mu += x(i, j);
    mu /= double(x.c);
    double var = 0;
    for (std::size_t j = 0; j < x.c; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= double(x.c);
    for (std::size_t j = 0; j < x.c; ++j) o(i, j) = (x(i, j) - mu) / std::sqrt(var + eps) * double(g[j]) + double(b[j]);
  }
  return o;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline Mat mlp(const Mat& x, const tsg::Mlp& m) {
  Mat h = linear(x, m.w1, m.b1);
  for (double& v : h.v) v = gelu(v);
  return linear(h, m.w2, m.b2);
}

struct Attention {
  Mat out;
  std::vector<Mat> maps;   // softmax over keys / patches
  std::vector<Mat> gated;  // softmax over query rows (classes)
};

inline Attention attention(const Mat& queries, const Mat& kv, const tsg::MultiHeadAttention& m) {
  const std::size_t heads = m.config().heads, dh = m.config().head_dim();
  const Mat q = linear(queries, m.wq, m.bq), k = linear(kv, m.wk, m.bk), v = linear(kv, m.wv, m.bv);
  Attention a;
  Mat cat(queries.r, heads * dh);
  for (std::size_t h = 0; h < heads; ++h) {
    Mat logits(queries.r, kv.r);
    for (std::size_t i = 0; i < queries.r; ++i)
      for (std::size_t j = 0; j < kv.r; ++j) {
        double s = 0;
        for (std::size_t d = 0; d < dh; ++d) s += q(i, h * dh + d) * k(j, h * dh + d);
        logits(i, j) = s / std::sqrt(double(dh));
      }
    a.maps.push_back(softmax_rows(logits));
    a.gated.push_back(softmax_cols(logits));
    const Mat& p = a.maps.back();
    for (std::size_t i = 0; i < queries.r; ++i)
      for (std::size_t d = 0; d < dh; ++d) {
        double s = 0;
        for (std::size_t j = 0; j < kv.r; ++j) s += p(i, j) * v(j, h * dh + d);
        cat(i, h * dh + d) = s;
      }
  }
  a.out = linear(cat, m.wo, m.bo);
  return a;
}

// Half-pixel-centre bilinear resampling of grid rows (edge clamped).
inline Mat bilinear(const Mat& x, tsg::SpatialSize from, tsg::SpatialSize to) {
  auto coord = [](std::size_t o, std::size_t in, std::size_t out, std::size_t& i0, std::size_t& i1, double& t) {
    double src = (double(o) + 0.5) * double(in) / double(out) - 0.5;
    if (src < 0) src = 0;
    i0 = std::min<std::size_t>(static_cast<std::size_t>(std::floor(src)), in - 1);
    i1 = std::min(i0 + 1, in - 1);
    t = src - double(i0);
  };
  Mat o(to.count(), x.c);
  for (std::size_t y = 0; y < to.h; ++y)
    for (std::size_t xx = 0; xx < to.w; ++xx) {
      std::size_t y0, y1, x0, x1;
      double ty, tx;
      coord(y, from.h, to.h, y0, y1, ty);
      coord(xx, from.w, to.w, x0, x1, tx);
      for (std::size_t j = 0; j < x.c; ++j) {
        const double top = (1 - tx) * x(y0 * from.w + x0, j) + tx * x(y0 * from.w + x1, j);
        const double bot = (1 - tx) * x(y1 * from.w + x0, j) + tx * x(y1 * from.w + x1, j);
        o(y * to.w + xx, j) = (1 - ty) * top + ty * bot;
      }
    }
  return o;
}

// Projection of one head group: concatenated (or averaged) heads times w, plus b.
inline Mat project_heads(const std::vector<Mat>& heads, const tsg::ScaleGate::Projection& p, bool average) {
  const std::size_t n = heads.front().r, w = heads.front().c;
  Mat stacked(n, average ? w : w * heads.size());
  for (std::size_t h = 0; h < heads.size(); ++h)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        if (average) {
          stacked(i, j) += heads[h](i, j) / double(heads.size());
        } else {
          stacked(i, h * w + j) = heads[h](i, j);
        }
      }
  return linear(stacked, p.w, p.b);
}

inline const tsg::ScaleGate::Projection& projection(const tsg::ScaleGate& g, std::size_t stage) {
  for (const auto& p : g.projections)
    if (p.source.stage == stage) return p;
  throw std::runtime_error("oracle: no projection for stage");
}

inline Mat gate_head(const tsg::ScaleGate& g, const Mat& integrated) {
  return softmax_rows(mlp(layernorm(integrated, g.norm.gamma, g.norm.beta), g.mlp));
}

// Self maps per stage (heads × N×N_t), already at the fusion resolution.
inline Mat integrate_self(const tsg::ScaleGate& g, const std::vector<std::pair<std::size_t, std::vector<Mat>>>& maps,
                          bool average) {
  Mat sum;
  for (const auto& [stage, heads] : maps) {
    const Mat term = project_heads(heads, projection(g, stage), average);
    sum = sum.v.empty() ? term : add(sum, term);
  }
  return sum;
}

inline Mat integrate_cross(const tsg::ScaleGate& g, const std::vector<Mat>& gated_cxn, bool average) {
  std::vector<Mat> t;
  for (const Mat& m : gated_cxn) t.push_back(transpose(m));
  return project_heads(t, projection(g, 0), average);
}

// Σ_s g[:,s]·F_s
inline Mat gated_sum(const std::vector<Mat>& f, const Mat& g) {
  Mat o(f.front().r, f.front().c);
  for (std::size_t s = 0; s < f.size(); ++s)
    for (std::size_t i = 0; i < o.r; ++i)
      for (std::size_t j = 0; j < o.c; ++j) o(i, j) += g(i, s) * f[s](i, j);
  return o;
}

struct StageInput {
  Mat features;               // N_s×C_s
  std::vector<Mat> maps;      // last-block self maps per head, N_s×N_s
  tsg::SpatialSize grid;
};

// Learned top-down refinement, written as the recursion it is.
inline std::vector<Mat> tsge(const tsg::Tsge& t, const std::vector<StageInput>& in, bool average) {
  const std::size_t S = in.size();
  std::vector<Mat> refined(S);
  refined[S - 1] = linear(in[S - 1].features, t.transforms[S - 1].w, t.transforms[S - 1].b);
  for (std::size_t s = S - 1; s >= 1; --s) {
    const tsg::SpatialSize grid = in[s - 1].grid;
    const Mat up = bilinear(refined[s], in[s].grid, grid);
    const Mat fine = linear(in[s - 1].features, t.transforms[s - 1].w, t.transforms[s - 1].b);
    std::vector<std::pair<std::size_t, std::vector<Mat>>> maps;
    for (std::size_t u = s; u <= S; ++u) {
      std::vector<Mat> heads;
      for (const Mat& m : in[u - 1].maps) heads.push_back(bilinear(m, in[u - 1].grid, grid));
      maps.emplace_back(u, heads);
    }
    const tsg::ScaleGate& gate = *t.gates[s - 1];
    const Mat g = gate_head(gate, integrate_self(gate, maps, average));
    refined[s - 1] = gated_sum({up, fine}, g);
  }
  return refined;
}

// Brute-force mIoU: per class, pixel sets counted one pixel at a time.
struct Miou {
  std::vector<bool> defined;
  std::vector<double> iou;
  bool any = false;
  double mean = 0;
};

inline Miou miou(const std::vector<int>& pred, const std::vector<int>& gt, std::size_t classes, int ignore = -1) {
  Miou r;
  double total = 0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::set<std::size_t> p, g;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i] == ignore) continue;
      if (pred[i] == int(c)) p.insert(i);
      if (gt[i] == int(c)) g.insert(i);
    }
    std::size_t inter = 0;
    for (std::size_t i : p) inter += g.count(i);
    const std::size_t uni = p.size() + g.size() - inter;
    r.defined.push_back(uni > 0);
    r.iou.push_back(uni > 0 ? double(inter) / double(uni) : 0.0);
    if (uni > 0) {
      total += r.iou.back();
      ++n;
    }
  }
  r.any = n > 0;
  r.mean = n > 0 ? total / double(n) : 0.0;
  return r;
}

}  // namespace oracle
