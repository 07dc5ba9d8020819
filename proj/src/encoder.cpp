#include "tsg/encoder.hpp"

#include <algorithm>
#include <array>

namespace tsg {

SpatialSize EncoderConfig::grid(std::size_t stage) const {
  if (stage < 1 || stage > stages.size()) throw Error("encoder: stage " + std::to_string(stage) + " out of range");
  SpatialSize g{image_h / patch, image_w / patch};
  for (std::size_t s = 1; s < stage; ++s) g = {g.h / 2, g.w / 2};
  return g;
}

std::size_t EncoderConfig::required_divisor() const { return patch << (stages.empty() ? 0 : stages.size() - 1); }

void EncoderConfig::validate() const {
  if (stages.empty()) throw Error("encoder: at least one stage required");
  if (patch == 0) throw Error("encoder: patch size must be positive");
  const std::size_t div = required_divisor();
  if (image_h == 0 || image_w == 0 || image_h % div != 0 || image_w % div != 0) {
    throw Error("encoder: image " + std::to_string(image_h) + "x" + std::to_string(image_w) +
                " must be divisible by patch*2^(S-1) = " + std::to_string(div));
  }
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (stages[s].blocks == 0) throw Error("encoder: stage " + std::to_string(s + 1) + " has no blocks");
    MhaConfig{stages[s].heads, stages[s].dim}.validate();
    if (s > 0 && stages[s].dim < stages[s - 1].dim) throw Error("encoder: stage widths must be nondecreasing");
  }
}

Backbone::Backbone(ParamStore& store, const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t patch_dim = cfg_.patch * cfg_.patch * 3;
  embed_w = store.add("encoder.embed.w", {patch_dim, cfg_.stages[0].dim}, Init::Xavier);
  embed_b = store.add("encoder.embed.b", {cfg_.stages[0].dim}, Init::Zeros);
  if (cfg_.positional) {
    pos = store.add("encoder.embed.pos", {cfg_.grid(1).count(), cfg_.stages[0].dim}, Init::Normal02);
  }
  for (std::size_t s = 0; s < cfg_.num_stages(); ++s) {
    const StageSpec& spec = cfg_.stages[s];
    const std::string prefix = "encoder.stage" + std::to_string(s + 1);
    if (s > 0) {
      merges.push_back({store.add(prefix + ".merge.w", {4 * cfg_.stages[s - 1].dim, spec.dim}, Init::Xavier),
                        store.add(prefix + ".merge.b", {spec.dim}, Init::Zeros)});
    }
    std::vector<EncoderBlock> stage_blocks;
    for (std::size_t b = 0; b < spec.blocks; ++b) {
      stage_blocks.emplace_back(store, prefix + ".block" + std::to_string(b + 1), MhaConfig{spec.heads, spec.dim},
                                spec.dim * cfg_.mlp_ratio);
    }
    blocks.push_back(std::move(stage_blocks));
  }
}

FeatureMap Backbone::patch_embed(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw ShapeError("patch_embed: expected H×W×3 image, got " + shape_str(image.shape()));
  }
  const std::size_t h = image.dim(0), w = image.dim(1), p = cfg_.patch;
  if (h != cfg_.image_h || w != cfg_.image_w) {
    throw ShapeError("patch_embed: image " + std::to_string(h) + "x" + std::to_string(w) + " but encoder built for " +
                     std::to_string(cfg_.image_h) + "x" + std::to_string(cfg_.image_w) +
                     " (sizes must be divisible by " + std::to_string(cfg_.required_divisor()) + ")");
  }
  const SpatialSize g = cfg_.grid(1);
  const Tensor pixels = reshape(image, {h * w, 3});
  std::vector<Tensor> taps;
  std::vector<std::size_t> rows(g.count());
  for (std::size_t dy = 0; dy < p; ++dy) {
    for (std::size_t dx = 0; dx < p; ++dx) {
      for (std::size_t py = 0; py < g.h; ++py) {
        for (std::size_t px = 0; px < g.w; ++px) rows[py * g.w + px] = (py * p + dy) * w + (px * p + dx);
      }
      taps.push_back(index_rows(pixels, rows));
    }
  }
  Tensor tokens = linear(concat(taps, 1), embed_w, embed_b);
  if (pos.defined()) tokens = add(tokens, pos);
  return {tokens, g, 1};
}

FeatureMap Backbone::patch_merge(const FeatureMap& fm) const {
  if (fm.grid.h % 2 != 0 || fm.grid.w % 2 != 0) {
    throw ShapeError("patch_merge: grid " + std::to_string(fm.grid.h) + "x" + std::to_string(fm.grid.w) +
                     " has odd size");
  }
  if (fm.stage < 1 || fm.stage > merges.size()) throw Error("patch_merge: no merge after stage " + std::to_string(fm.stage));
  const SpatialSize out{fm.grid.h / 2, fm.grid.w / 2};
  static constexpr std::array<std::array<std::size_t, 2>, 4> kOffsets{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
  std::vector<Tensor> taps;
  std::vector<std::size_t> rows(out.count());
  for (const auto& [dy, dx] : kOffsets) {
    for (std::size_t y = 0; y < out.h; ++y) {
      for (std::size_t x = 0; x < out.w; ++x) rows[y * out.w + x] = (2 * y + dy) * fm.grid.w + (2 * x + dx);
    }
    taps.push_back(index_rows(fm.data, rows));
  }
  const Merge& m = merges[fm.stage - 1];
  return {linear(concat(taps, 1), m.w, m.b), out, fm.stage + 1};
}

Backbone::Output Backbone::run(const Tensor& image) const {
  Output out;
  FeatureMap x = patch_embed(image);
  for (std::size_t s = 1; s <= cfg_.num_stages(); ++s) {
    if (s > 1) x = patch_merge(x);
    AttentionBundle last;
    for (std::size_t b = 0; b < blocks[s - 1].size(); ++b) {
      auto r = blocks[s - 1][b](x.data);
      x.data = r.tokens;
      last = std::move(r.maps);
      last.source = "encoder.stage" + std::to_string(s) + ".block" + std::to_string(b + 1);
    }
    last.stage = s;
    last.grid = x.grid;
    out.features.push_back(x);
    out.last_maps.push_back(std::move(last));
  }
  return out;
}

AttentionBundle upsample_attention(const AttentionBundle& bundle, SpatialSize target) {
  if (target.h < bundle.grid.h || target.w < bundle.grid.w) {
    throw ShapeError("upsample_attention: target grid smaller than source grid of '" + bundle.source + "'");
  }
  AttentionBundle out = bundle;
  out.grid = target;
  if (target == bundle.grid) return out;
  for (Tensor& m : out.maps) m = upsample_bilinear(m, bundle.grid, target);
  return out;
}

Tensor fuse_pair(const Tensor& coarse_up, const Tensor& fine, const ScaleGates& gates) {
  if (gates.num_scales != 2 || gates.gates.dim(1) != 2) throw ShapeError("fuse_pair: expected two-way gates");
  if (coarse_up.shape() != fine.shape() || gates.gates.dim(0) != fine.dim(0)) {
    throw ShapeError("fuse_pair: shapes " + shape_str(coarse_up.shape()) + ", " + shape_str(fine.shape()) +
                     " and gates " + shape_str(gates.gates.shape()) + " disagree");
  }
  const std::vector<Tensor> terms{scale_rows(coarse_up, narrow(gates.gates, 1, 0, 1)),
                                  scale_rows(fine, narrow(gates.gates, 1, 1, 1))};
  return add_n(terms);
}

Tsge::Tsge(ParamStore& store, const EncoderConfig& enc, std::size_t d_f, const TsgConfig& tsg, EncoderFusion mode,
           bool shared_gates, std::vector<std::size_t> used_stages)
    : enc_(enc), mode_(mode) {
  const std::size_t num = enc_.num_stages();
  if (used_stages.empty() || mode != EncoderFusion::Linear) {
    used_stages.clear();
    for (std::size_t s = 1; s <= num; ++s) used_stages.push_back(s);
  }
  transforms.resize(num);
  for (std::size_t s : used_stages) {
    const std::string prefix = "encoder.refine.stage" + std::to_string(s);
    transforms[s - 1] = {store.add(prefix + ".w", {enc_.stages[s - 1].dim, d_f}, Init::Xavier),
                         store.add(prefix + ".b", {d_f}, Init::Zeros)};
  }
  if (mode != EncoderFusion::Tsge || num < 2) return;

  auto sources_from = [&](std::size_t first) {
    std::vector<MapSource> sources;
    for (std::size_t t = first; t <= num; ++t) sources.push_back({t, enc_.stages[t - 1].heads, enc_.grid(t).count()});
    return sources;
  };
  gates.resize(num - 1);
  if (shared_gates) {
    auto shared = std::make_shared<ScaleGate>(store, "encoder.tsge.shared", tsg, sources_from(1), 2);
    std::fill(gates.begin(), gates.end(), shared);
  } else {
    for (std::size_t s = 1; s < num; ++s) {
      gates[s - 1] =
          std::make_shared<ScaleGate>(store, "encoder.tsge.step" + std::to_string(s), tsg, sources_from(s), 2);
    }
  }
}

TsgeOutput Tsge::fuse(const std::vector<FeatureMap>& features, const std::vector<AttentionBundle>& maps,
                      GateMode mode) const {
  const std::size_t num = enc_.num_stages();
  if (features.size() != num) throw Error("tsge: expected " + std::to_string(num) + " feature maps");
  TsgeOutput out;
  out.refined.resize(num);
  out.gates.resize(num > 0 ? num - 1 : 0);
  auto transform = [&](std::size_t s) {
    const Transform& t = transforms[s - 1];
    return FeatureMap{linear(features[s - 1].data, t.w, t.b), features[s - 1].grid, s};
  };

  if (mode_ == EncoderFusion::Linear) {
    for (std::size_t s = 1; s <= num; ++s) {
      if (transforms[s - 1].w.defined()) out.refined[s - 1] = transform(s);
    }
    return out;
  }

  out.refined[num - 1] = transform(num);
  for (std::size_t s = num - 1; s >= 1; --s) {
    const SpatialSize grid = features[s - 1].grid;
    const Tensor up = upsample_bilinear(out.refined[s].data, out.refined[s].grid, grid);
    const FeatureMap fine = transform(s);
    ScaleGates g;
    if (mode_ == EncoderFusion::Fpn || mode == GateMode::Uniform) {
      g = {Tensor::full({grid.count(), 2}, Real(0.5)), 2};
    } else {
      std::vector<AttentionBundle> resampled;
      for (std::size_t t = s; t <= num; ++t) resampled.push_back(upsample_attention(maps[t - 1], grid));
      g = gates[s - 1]->gate(gates[s - 1]->integrate_self_maps(resampled));
    }
    out.refined[s - 1] = {fuse_pair(up, fine.data, g), grid, s};
    out.gates[s - 1] = std::move(g);
  }
  return out;
}

}  // namespace tsg
