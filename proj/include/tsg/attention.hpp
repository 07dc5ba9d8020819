#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tsg/ops.hpp"
#include "tsg/params.hpp"

namespace tsg {

struct MhaConfig {
  std::size_t heads = 1;
  std::size_t model_dim = 1;

  std::size_t head_dim() const { return model_dim / heads; }
  void validate() const;
};

/// Which axis of an attention map was normalized.
enum class SoftmaxAxis {
  Keys,     // over columns: keys (self) or patches (cross)
  Classes,  // over rows: classes of a cross map
};

/// Per-head attention maps of one attention module.
///
/// Self maps are N×N (rows = queries, columns = keys); cross maps are C×N.
/// `grid` describes the row layout of self maps so they can be resampled.
struct AttentionBundle {
  std::vector<Tensor> maps;
  SoftmaxAxis axis = SoftmaxAxis::Keys;
  std::string source;
  std::size_t stage = 0;  // 1-based encoder stage of self maps; 0 otherwise
  SpatialSize grid;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention(ParamStore& store, const std::string& prefix, MhaConfig cfg);

  struct SelfResult {
    Tensor out;
    AttentionBundle maps;
  };
  struct CrossResult {
    Tensor out;
    AttentionBundle maps;                  // softmax over patches
    std::optional<AttentionBundle> gated;  // same logits, softmax over classes
  };

  SelfResult self_attention(const Tensor& tokens) const;
  CrossResult cross_attention(const Tensor& queries, const Tensor& memory, bool gate_softmax) const;

  const MhaConfig& config() const { return cfg_; }

  Tensor wq, bq, wk, bk, wv, bv, wo, bo;

 private:
  // Per-head logits QKᵀ/√d_head and value slices.
  struct Heads {
    std::vector<Tensor> logits;
    std::vector<Tensor> values;
  };
  Heads project(const Tensor& queries, const Tensor& keys_values) const;
  Tensor combine(const std::vector<Tensor>& maps, const std::vector<Tensor>& values) const;

  MhaConfig cfg_;
};

/// Two-layer GELU MLP.
struct Mlp {
  Mlp(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out);
  Tensor operator()(const Tensor& x) const;
  Tensor w1, b1, w2, b2;
};

struct LayerNormParams {
  LayerNormParams(ParamStore& store, const std::string& prefix, std::size_t dim);
  Tensor operator()(const Tensor& x) const;
  Tensor gamma, beta;
};

/// Pre-norm transformer encoder block: x + SA(LN(x)), then + MLP(LN(·)).
class EncoderBlock {
 public:
  EncoderBlock(ParamStore& store, const std::string& prefix, MhaConfig cfg, std::size_t mlp_dim);

  struct Result {
    Tensor tokens;
    AttentionBundle maps;
  };
  Result operator()(const Tensor& tokens) const;

  LayerNormParams norm1;
  MultiHeadAttention attn;
  LayerNormParams norm2;
  Mlp mlp;
};

/// Pre-norm decoder block over class queries: self-attention, then
/// cross-attention to the memory, then MLP, each with a residual.
class DecoderBlock {
 public:
  DecoderBlock(ParamStore& store, const std::string& prefix, MhaConfig cfg, std::size_t mlp_dim);

  struct Result {
    Tensor queries;
    AttentionBundle self_maps;
    AttentionBundle cross_maps;
    AttentionBundle cross_gated;
  };
  Result operator()(const Tensor& queries, const Tensor& memory) const;

  LayerNormParams norm1;
  MultiHeadAttention self_attn;
  LayerNormParams norm2;
  MultiHeadAttention cross_attn;
  LayerNormParams norm3;
  Mlp mlp;
};

}  // namespace tsg
