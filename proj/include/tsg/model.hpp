#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsg/decoder.hpp"
#include "tsg/encoder.hpp"

namespace tsg {

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t d_f = 64;
  TsgConfig tsg;
  std::size_t dec_blocks = 3;
  std::size_t dec_heads = 4;
  std::size_t classes = 5;
  std::size_t mlp_ratio = 4;
  EncoderFusion encoder_fusion = EncoderFusion::Tsge;
  DecoderFusion decoder_fusion = DecoderFusion::Tsgd;
  std::vector<std::size_t> decoder_scales;  // 1-based stages feeding the decoder; empty = all
  bool shared_gates = false;
  GateMode gate_mode = GateMode::Learned;
  std::uint64_t seed = 0;

  std::vector<std::size_t> resolved_decoder_scales() const;
  void validate() const;
};

struct ForwardResult {
  Backbone::Output backbone;
  TsgeOutput encoder;
  DecoderOutput decoder;
  Tensor scores;  // N_1×C, pre-softmax
  SpatialSize grid;

  SegLogits probabilities() const { return {softmax(scores, 1), grid}; }
};

/// Encoder (backbone + refinement) and class-query decoder.
class SegModel {
 public:
  explicit SegModel(const ModelConfig& cfg);
  SegModel(const SegModel&) = delete;
  SegModel& operator=(const SegModel&) = delete;

  ForwardResult forward(const Tensor& image) const;
  // Patch-resolution cross-entropy against patch labels.
  Tensor loss(const Tensor& image, std::span<const int> patch_labels) const;

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  bool has_decoder_gates() const { return !decoder_.gates.empty(); }

  const Backbone& backbone() const { return backbone_; }
  const Tsge& refinement() const { return tsge_; }
  const Decoder& decoder() const { return decoder_; }

 private:
  ModelConfig cfg_;
  ParamStore store_;
  Backbone backbone_;
  Tsge tsge_;
  Decoder decoder_;
};

/// Ablation presets built on top of a base configuration.
struct Baseline {
  enum class Kind { Tsg, FpnSum, PlainSum, SingleScale, TsgeOnly, TsgdOnly, FpnTsgd, TsgShared, TsgHeadAverage };
  Kind kind = Kind::Tsg;
  std::size_t scale = 0;  // SingleScale only

  static Baseline parse(const std::string& name);
  std::string name() const;
};

ModelConfig make_baseline(const Baseline& baseline, ModelConfig base);

}  // namespace tsg
