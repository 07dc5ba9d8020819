#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tsg/attention.hpp"

namespace tsg {

/// Per-patch distribution over candidate scales: gates[n][s] ≥ 0, rows sum to 1.
struct ScaleGates {
  Tensor gates;  // N×S
  std::size_t num_scales = 0;
};

struct TsgConfig {
  std::size_t d_a = 64;
  std::size_t hidden = 64;
  bool integrate_bias = true;
  bool head_average = false;  // average heads instead of concatenating them
};

/// Shape of one family of attention maps feeding a gate head.
struct MapSource {
  std::size_t stage = 0;  // encoder stage for self maps, 0 for decoder cross maps
  std::size_t heads = 1;
  std::size_t width = 1;  // columns of each map (keys N_t, or classes C after transposing)
};

/// Transformer scale gate: attention maps → integrated map A (N×d_A) →
/// LayerNorm → linear/GELU/linear → softmax over scales.
class ScaleGate {
 public:
  ScaleGate(ParamStore& store, const std::string& prefix, const TsgConfig& cfg, std::vector<MapSource> sources,
            std::size_t num_scales);

  /// Self maps already resampled to the fusion resolution. Each bundle is
  /// routed to the projection registered for its stage; projections are
  /// summed.
  Tensor integrate_self_maps(std::span<const AttentionBundle> bundles) const;

  /// Class-softmax cross maps (C×N per head), transposed and concatenated.
  Tensor integrate_cross_maps(const AttentionBundle& gated) const;

  ScaleGates gate(const Tensor& integrated) const;

  std::size_t num_scales() const { return num_scales_; }

  struct Projection {
    MapSource source;
    Tensor w;
    Tensor b;  // undefined when integrate_bias is off
  };
  std::vector<Projection> projections;
  LayerNormParams norm;
  Mlp mlp;

 private:
  const Projection& projection_for(std::size_t stage) const;
  Tensor project(const Projection& p, const std::vector<Tensor>& maps) const;

  TsgConfig cfg_;
  std::size_t num_scales_;
};

}  // namespace tsg
