#include "tsg/attention.hpp"

#include <cmath>

namespace tsg {

void MhaConfig::validate() const {
  if (heads == 0 || model_dim == 0) throw Error("attention config: heads and model_dim must be positive");
  if (model_dim % heads != 0) {
    throw Error("attention config: model_dim " + std::to_string(model_dim) + " not divisible by " +
                std::to_string(heads) + " heads");
  }
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& prefix, MhaConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg_.model_dim;
  wq = store.add(prefix + ".wq", {d, d}, Init::Xavier);
  bq = store.add(prefix + ".bq", {d}, Init::Zeros);
  wk = store.add(prefix + ".wk", {d, d}, Init::Xavier);
  bk = store.add(prefix + ".bk", {d}, Init::Zeros);
  wv = store.add(prefix + ".wv", {d, d}, Init::Xavier);
  bv = store.add(prefix + ".bv", {d}, Init::Zeros);
  wo = store.add(prefix + ".wo", {d, d}, Init::Xavier);
  bo = store.add(prefix + ".bo", {d}, Init::Zeros);
}

MultiHeadAttention::Heads MultiHeadAttention::project(const Tensor& queries, const Tensor& keys_values) const {
  const std::size_t d = cfg_.model_dim;
  if (queries.rank() != 2 || queries.dim(1) != d || keys_values.rank() != 2 || keys_values.dim(1) != d) {
    throw ShapeError("attention: inputs " + shape_str(queries.shape()) + " / " + shape_str(keys_values.shape()) +
                     " do not match model_dim " + std::to_string(d));
  }
  const Tensor q = linear(queries, wq, bq);
  const Tensor k = linear(keys_values, wk, bk);
  const Tensor v = linear(keys_values, wv, bv);
  const std::size_t dh = cfg_.head_dim();
  const Real inv_scale = Real(1) / std::sqrt(Real(dh));
  Heads heads;
  for (std::size_t h = 0; h < cfg_.heads; ++h) {
    const Tensor qh = narrow(q, 1, h * dh, dh);
    const Tensor kh = narrow(k, 1, h * dh, dh);
    heads.logits.push_back(scale(matmul_nt(qh, kh), inv_scale));
    heads.values.push_back(narrow(v, 1, h * dh, dh));
  }
  return heads;
}

Tensor MultiHeadAttention::combine(const std::vector<Tensor>& maps, const std::vector<Tensor>& values) const {
  std::vector<Tensor> per_head;
  per_head.reserve(maps.size());
  for (std::size_t h = 0; h < maps.size(); ++h) per_head.push_back(matmul(maps[h], values[h]));
  return linear(cfg_.heads == 1 ? per_head.front() : concat(per_head, 1), wo, bo);
}

MultiHeadAttention::SelfResult MultiHeadAttention::self_attention(const Tensor& tokens) const {
  Heads heads = project(tokens, tokens);
  SelfResult r;
  r.maps.axis = SoftmaxAxis::Keys;
  for (const Tensor& logits : heads.logits) r.maps.maps.push_back(softmax(logits, 1));
  r.out = combine(r.maps.maps, heads.values);
  return r;
}

MultiHeadAttention::CrossResult MultiHeadAttention::cross_attention(const Tensor& queries, const Tensor& memory,
                                                                    bool gate_softmax) const {
  Heads heads = project(queries, memory);
  CrossResult r;
  r.maps.axis = SoftmaxAxis::Keys;
  for (const Tensor& logits : heads.logits) r.maps.maps.push_back(softmax(logits, 1));
  if (gate_softmax) {
    AttentionBundle gated;
    gated.axis = SoftmaxAxis::Classes;
    for (const Tensor& logits : heads.logits) gated.maps.push_back(softmax(logits, 0));
    r.gated = std::move(gated);
  }
  r.out = combine(r.maps.maps, heads.values);
  return r;
}

Mlp::Mlp(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out)
    : w1(store.add(prefix + ".w1", {in, hidden}, Init::Xavier)),
      b1(store.add(prefix + ".b1", {hidden}, Init::Zeros)),
      w2(store.add(prefix + ".w2", {hidden, out}, Init::Xavier)),
      b2(store.add(prefix + ".b2", {out}, Init::Zeros)) {}

Tensor Mlp::operator()(const Tensor& x) const { return linear(gelu(linear(x, w1, b1)), w2, b2); }

LayerNormParams::LayerNormParams(ParamStore& store, const std::string& prefix, std::size_t dim)
    : gamma(store.add(prefix + ".gamma", {dim}, Init::Ones)), beta(store.add(prefix + ".beta", {dim}, Init::Zeros)) {}

Tensor LayerNormParams::operator()(const Tensor& x) const { return layernorm(x, gamma, beta); }

EncoderBlock::EncoderBlock(ParamStore& store, const std::string& prefix, MhaConfig cfg, std::size_t mlp_dim)
    : norm1(store, prefix + ".norm1", cfg.model_dim),
      attn(store, prefix + ".attn", cfg),
      norm2(store, prefix + ".norm2", cfg.model_dim),
      mlp(store, prefix + ".mlp", cfg.model_dim, mlp_dim, cfg.model_dim) {}

EncoderBlock::Result EncoderBlock::operator()(const Tensor& tokens) const {
  auto sa = attn.self_attention(norm1(tokens));
  Tensor x = add(tokens, sa.out);
  x = add(x, mlp(norm2(x)));
  return {x, std::move(sa.maps)};
}

DecoderBlock::DecoderBlock(ParamStore& store, const std::string& prefix, MhaConfig cfg, std::size_t mlp_dim)
    : norm1(store, prefix + ".norm1", cfg.model_dim),
      self_attn(store, prefix + ".self_attn", cfg),
      norm2(store, prefix + ".norm2", cfg.model_dim),
      cross_attn(store, prefix + ".cross_attn", cfg),
      norm3(store, prefix + ".norm3", cfg.model_dim),
      mlp(store, prefix + ".mlp", cfg.model_dim, mlp_dim, cfg.model_dim) {}

DecoderBlock::Result DecoderBlock::operator()(const Tensor& queries, const Tensor& memory) const {
  auto sa = self_attn.self_attention(norm1(queries));
  Tensor x = add(queries, sa.out);
  auto ca = cross_attn.cross_attention(norm2(x), memory, true);
  x = add(x, ca.out);
  x = add(x, mlp(norm3(x)));
  return {x, std::move(sa.maps), std::move(ca.maps), std::move(*ca.gated)};
}

}  // namespace tsg
