#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "tsg/attention.hpp"
#include "tsg/encoder.hpp"
#include "tsg/scale_gate.hpp"

namespace tsg {

enum class DecoderFusion {
  Sum,      // plain sum of the upsampled maps in every block
  Uniform,  // plain sum in block 1, fixed 1/S gates afterwards
  Tsgd,     // plain sum in block 1, gates from the previous block's cross maps afterwards
};

struct DecoderConfig {
  std::size_t d_f = 64;
  std::size_t heads = 4;
  std::size_t blocks = 3;
  std::size_t classes = 5;
  std::size_t mlp_ratio = 4;
  DecoderFusion fusion = DecoderFusion::Tsgd;
  TsgConfig tsg;
  bool shared_gates = false;
};

/// Elementwise sum of the upsampled scale maps (memory of the first block).
Tensor tsgd_fuse_first(std::span<const Tensor> features_up);

/// Per-patch gate-weighted sum Σ_s g[:,s]·F_s.
Tensor gated_sum(std::span<const Tensor> features_up, const ScaleGates& gates);

/// Patch×class scores before the softmax: F·Yᵀ/√d_F.
Tensor class_scores(const Tensor& f_dec, const Tensor& y);

struct SegLogits {
  Tensor p;  // N×C, rows sum to 1
  SpatialSize grid;
};

SegLogits predict(const Tensor& f_dec, const Tensor& y, SpatialSize grid);

/// Per-patch argmax (ties to the lowest class) spread over each patch's
/// pixels by nearest-neighbour upsampling.
std::vector<int> logits_to_mask(const SegLogits& p, std::size_t height, std::size_t width);

struct DecoderOutput {
  Tensor y;                            // C×d_F query embeddings
  std::vector<Tensor> memories;        // fused memory of each block
  std::vector<ScaleGates> gates;       // blocks 2..L in gated modes (gates[l-2])
  std::vector<AttentionBundle> cross;  // class-softmax cross maps of each block
  Tensor memory_last() const { return memories.back(); }
};

/// Class-query decoder with per-block fusion of the multi-scale memory.
class Decoder {
 public:
  Decoder(ParamStore& store, const DecoderConfig& cfg, std::size_t num_scales);

  /// Upsamples every refined map to `target` rows.
  static std::vector<Tensor> upsample_features(std::span<const FeatureMap> refined, SpatialSize target);

  /// Memory of block `block` (2-based) from the previous block's class-softmax maps.
  std::pair<Tensor, ScaleGates> tsgd_fuse(std::span<const Tensor> features_up, const AttentionBundle& prev_cross,
                                          std::size_t block) const;

  DecoderOutput run(std::span<const Tensor> features_up, GateMode mode = GateMode::Learned) const;

  const DecoderConfig& config() const { return cfg_; }
  std::size_t num_scales() const { return num_scales_; }

  Tensor queries;  // zero-initialized class tokens
  std::vector<DecoderBlock> blocks;
  std::vector<std::shared_ptr<ScaleGate>> gates;  // gates[l-2] serves block l; aliased when shared

 private:
  DecoderConfig cfg_;
  std::size_t num_scales_;
};

}  // namespace tsg
