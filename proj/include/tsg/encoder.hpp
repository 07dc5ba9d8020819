#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "tsg/attention.hpp"
#include "tsg/scale_gate.hpp"

namespace tsg {

struct StageSpec {
  std::size_t blocks = 1;
  std::size_t dim = 32;
  std::size_t heads = 2;
};

struct EncoderConfig {
  std::size_t image_h = 64;
  std::size_t image_w = 64;
  std::size_t patch = 4;
  std::vector<StageSpec> stages{{1, 32, 2}, {1, 64, 4}, {1, 128, 4}};
  bool positional = true;
  std::size_t mlp_ratio = 4;

  std::size_t num_stages() const { return stages.size(); }
  // Patch grid of a 1-based stage; each stage halves the previous one.
  SpatialSize grid(std::size_t stage) const;
  std::size_t required_divisor() const;
  void validate() const;
};

/// Patch features of one encoder stage, rows laid out on `grid`.
struct FeatureMap {
  Tensor data;  // N_s×d
  SpatialSize grid;
  std::size_t stage = 1;
};

/// Hierarchical encoder: patch embedding, per-stage global-attention blocks,
/// and 2×2 patch merging between stages.
class Backbone {
 public:
  Backbone(ParamStore& store, const EncoderConfig& cfg);

  // image: H×W×3
  FeatureMap patch_embed(const Tensor& image) const;
  // Concatenates each 2×2 neighbourhood and projects to the next stage's width.
  FeatureMap patch_merge(const FeatureMap& fm) const;

  struct Output {
    std::vector<FeatureMap> features;        // F_1..F_S
    std::vector<AttentionBundle> last_maps;  // last block's self maps, per stage
  };
  Output run(const Tensor& image) const;

  const EncoderConfig& config() const { return cfg_; }

  Tensor embed_w, embed_b, pos;
  std::vector<std::vector<EncoderBlock>> blocks;
  struct Merge {
    Tensor w, b;
  };
  std::vector<Merge> merges;  // merges[i] maps stage i+1 to stage i+2

 private:
  EncoderConfig cfg_;
};

/// Resamples the query rows of stage-t self maps onto `target`; key columns
/// are untouched. Rows remain probability vectors since interpolation is affine.
AttentionBundle upsample_attention(const AttentionBundle& bundle, SpatialSize target);

/// Per-patch convex combination g[:,0]·coarse_up + g[:,1]·fine.
Tensor fuse_pair(const Tensor& coarse_up, const Tensor& fine, const ScaleGates& gates);

enum class EncoderFusion {
  Linear,  // per-stage projection to d_F only
  Fpn,     // top-down recursion with fixed equal gates
  Tsge,    // top-down recursion with learned scale gates
};

enum class GateMode {
  Learned,
  Uniform,  // every gate replaced by 1/S (diagnostics and baselines)
};

struct TsgeOutput {
  std::vector<FeatureMap> refined;  // F^enc_1..F^enc_S at width d_F
  std::vector<ScaleGates> gates;    // gates[s-1] produced when fusing into stage s (s < S)
};

/// Top-down refinement of the backbone features into d_F-wide maps.
class Tsge {
 public:
  Tsge(ParamStore& store, const EncoderConfig& enc, std::size_t d_f, const TsgConfig& tsg, EncoderFusion mode,
       bool shared_gates, std::vector<std::size_t> used_stages = {});

  TsgeOutput fuse(const std::vector<FeatureMap>& features, const std::vector<AttentionBundle>& maps,
                  GateMode mode = GateMode::Learned) const;

  EncoderFusion mode() const { return mode_; }

  struct Transform {
    Tensor w, b;
  };
  std::vector<Transform> transforms;            // indexed by stage-1; undefined when unused
  std::vector<std::shared_ptr<ScaleGate>> gates;  // indexed by stage-1 for s < S; aliased when shared

 private:
  EncoderConfig enc_;
  EncoderFusion mode_;
};

}  // namespace tsg
