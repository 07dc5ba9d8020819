#include "tsg/decoder.hpp"

#include <algorithm>
#include <cmath>

namespace tsg {

Tensor tsgd_fuse_first(std::span<const Tensor> features_up) {
  if (features_up.empty()) throw Error("decoder: no feature maps to fuse");
  for (const Tensor& f : features_up) {
    if (f.shape() != features_up.front().shape()) {
      throw ShapeError("decoder: feature maps " + shape_str(features_up.front().shape()) + " and " +
                       shape_str(f.shape()) + " differ; upsample before fusing");
    }
  }
  return features_up.size() == 1 ? features_up.front() : add_n(features_up);
}

Tensor gated_sum(std::span<const Tensor> features_up, const ScaleGates& gates) {
  if (features_up.size() != gates.num_scales || gates.gates.dim(1) != gates.num_scales) {
    throw ShapeError("decoder: " + std::to_string(features_up.size()) + " feature maps for gates " +
                     shape_str(gates.gates.shape()));
  }
  std::vector<Tensor> terms;
  for (std::size_t s = 0; s < features_up.size(); ++s) {
    if (features_up[s].shape() != features_up.front().shape() || features_up[s].dim(0) != gates.gates.dim(0)) {
      throw ShapeError("decoder: feature map " + shape_str(features_up[s].shape()) + " does not match gates " +
                       shape_str(gates.gates.shape()));
    }
    terms.push_back(scale_rows(features_up[s], narrow(gates.gates, 1, s, 1)));
  }
  return terms.size() == 1 ? terms.front() : add_n(terms);
}

Tensor class_scores(const Tensor& f_dec, const Tensor& y) {
  if (f_dec.rank() != 2 || y.rank() != 2 || f_dec.dim(1) != y.dim(1)) {
    throw ShapeError("predict: features " + shape_str(f_dec.shape()) + " and queries " + shape_str(y.shape()) +
                     " disagree");
  }
  return scale(matmul_nt(f_dec, y), Real(1) / std::sqrt(Real(f_dec.dim(1))));
}

SegLogits predict(const Tensor& f_dec, const Tensor& y, SpatialSize grid) {
  if (f_dec.dim(0) != grid.count()) throw ShapeError("predict: feature rows do not match the patch grid");
  return {softmax(class_scores(f_dec, y), 1), grid};
}

std::vector<int> logits_to_mask(const SegLogits& p, std::size_t height, std::size_t width) {
  const SpatialSize g = p.grid;
  if (g.h == 0 || g.w == 0 || height % g.h != 0 || width % g.w != 0) {
    throw ShapeError("logits_to_mask: image " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not a multiple of the patch grid");
  }
  const std::size_t classes = p.p.dim(1);
  const auto scores = p.p.data();
  std::vector<int> patch_label(g.count());
  for (std::size_t n = 0; n < g.count(); ++n) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (scores[n * classes + c] > scores[n * classes + best]) best = c;
    }
    patch_label[n] = static_cast<int>(best);
  }
  const std::size_t ph = height / g.h, pw = width / g.w;
  std::vector<int> mask(height * width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) mask[y * width + x] = patch_label[(y / ph) * g.w + x / pw];
  }
  return mask;
}

Decoder::Decoder(ParamStore& store, const DecoderConfig& cfg, std::size_t num_scales)
    : cfg_(cfg), num_scales_(num_scales) {
  if (cfg_.blocks == 0) throw Error("decoder: at least one block required");
  if (num_scales_ == 0) throw Error("decoder: at least one scale required");
  queries = store.add("decoder.queries", {cfg_.classes, cfg_.d_f}, Init::Zeros);
  for (std::size_t l = 1; l <= cfg_.blocks; ++l) {
    blocks.emplace_back(store, "decoder.block" + std::to_string(l), MhaConfig{cfg_.heads, cfg_.d_f},
                        cfg_.d_f * cfg_.mlp_ratio);
  }
  if (cfg_.fusion != DecoderFusion::Tsgd || cfg_.blocks < 2) return;
  const std::vector<MapSource> sources{{0, cfg_.heads, cfg_.classes}};
  gates.resize(cfg_.blocks - 1);
  if (cfg_.shared_gates) {
    auto shared = std::make_shared<ScaleGate>(store, "decoder.tsgd.shared", cfg_.tsg, sources, num_scales_);
    std::fill(gates.begin(), gates.end(), shared);
  } else {
    for (std::size_t l = 2; l <= cfg_.blocks; ++l) {
      gates[l - 2] =
          std::make_shared<ScaleGate>(store, "decoder.tsgd.block" + std::to_string(l), cfg_.tsg, sources, num_scales_);
    }
  }
}

std::vector<Tensor> Decoder::upsample_features(std::span<const FeatureMap> refined, SpatialSize target) {
  std::vector<Tensor> out;
  for (const FeatureMap& f : refined) out.push_back(upsample_bilinear(f.data, f.grid, target));
  return out;
}

std::pair<Tensor, ScaleGates> Decoder::tsgd_fuse(std::span<const Tensor> features_up, const AttentionBundle& prev_cross,
                                                 std::size_t block) const {
  if (block < 2 || block > cfg_.blocks || gates.empty()) {
    throw Error("decoder: block " + std::to_string(block) + " has no scale gate");
  }
  const ScaleGate& head = *gates[block - 2];
  ScaleGates g = head.gate(head.integrate_cross_maps(prev_cross));
  return {gated_sum(features_up, g), g};
}

DecoderOutput Decoder::run(std::span<const Tensor> features_up, GateMode mode) const {
  if (features_up.size() != num_scales_) {
    throw Error("decoder: expected " + std::to_string(num_scales_) + " feature maps, got " +
                std::to_string(features_up.size()));
  }
  DecoderOutput out;
  Tensor x = queries;
  for (std::size_t l = 1; l <= cfg_.blocks; ++l) {
    Tensor memory;
    const bool gated = l >= 2 && cfg_.fusion != DecoderFusion::Sum;
    if (!gated) {
      memory = tsgd_fuse_first(features_up);
    } else if (cfg_.fusion == DecoderFusion::Uniform || mode == GateMode::Uniform) {
      const std::size_t n = features_up.front().dim(0);
      ScaleGates g{Tensor::full({n, num_scales_}, Real(1) / Real(num_scales_)), num_scales_};
      memory = gated_sum(features_up, g);
      out.gates.push_back(std::move(g));
    } else {
      auto [m, g] = tsgd_fuse(features_up, out.cross.back(), l);
      memory = m;
      out.gates.push_back(std::move(g));
    }
    auto r = blocks[l - 1](x, memory);
    x = r.queries;
    r.cross_gated.source = "decoder.block" + std::to_string(l) + ".cross_attn";
    out.cross.push_back(std::move(r.cross_gated));
    out.memories.push_back(memory);
  }
  out.y = x;
  return out;
}

}  // namespace tsg
