#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "tsg/attention.hpp"

using namespace tsg;
using oracle::random_tensor;

namespace {

void randomize_all(ParamStore& store, std::uint64_t seed) {
  for (std::size_t i = 0; i < store.params().size(); ++i) oracle::randomize(store.params()[i].tensor, seed * 1000 + i);
}

}  // namespace

TEST(Attention, ConfigValidation) {
  EXPECT_THROW((MhaConfig{3, 8}.validate()), Error);
  EXPECT_THROW((MhaConfig{0, 8}.validate()), Error);
  EXPECT_NO_THROW((MhaConfig{2, 8}.validate()));
}

TEST(Attention, SelfAttentionMatchesOracle) {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const std::size_t heads = 1 + trial % 3, dim = heads * (2 + trial % 3), n = 2 + trial % 5;
    ParamStore store(trial);
    MultiHeadAttention mha(store, "a", {heads, dim});
    randomize_all(store, trial);
    const Tensor x = random_tensor({n, dim}, 100 + trial);
    const auto r = mha.self_attention(x);
    const auto o = oracle::attention(oracle::of(x), oracle::of(x), mha);
    EXPECT_LT(oracle::max_abs_diff(o.out, r.out), 1e-12);
    ASSERT_EQ(r.maps.maps.size(), heads);
    for (std::size_t h = 0; h < heads; ++h) EXPECT_LT(oracle::max_abs_diff(o.maps[h], r.maps.maps[h]), 1e-14);
    EXPECT_EQ(r.maps.axis, SoftmaxAxis::Keys);
  }
}

TEST(Attention, CrossAttentionMatchesOracle) {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const std::size_t heads = 1 + trial % 2, dim = heads * 3, classes = 2 + trial % 3, n = 3 + trial % 6;
    ParamStore store(trial);
    MultiHeadAttention mha(store, "c", {heads, dim});
    randomize_all(store, trial + 77);
    const Tensor q = random_tensor({classes, dim}, 200 + trial), mem = random_tensor({n, dim}, 300 + trial);
    const auto r = mha.cross_attention(q, mem, true);
    const auto o = oracle::attention(oracle::of(q), oracle::of(mem), mha);
    EXPECT_LT(oracle::max_abs_diff(o.out, r.out), 1e-12);
    ASSERT_TRUE(r.gated.has_value());
    for (std::size_t h = 0; h < heads; ++h) {
      EXPECT_LT(oracle::max_abs_diff(o.maps[h], r.maps.maps[h]), 1e-14);
      EXPECT_LT(oracle::max_abs_diff(o.gated[h], r.gated->maps[h]), 1e-14);
    }
    EXPECT_EQ(r.gated->axis, SoftmaxAxis::Classes);
  }
}

TEST(Attention, CrossMapsNormalizeOverOppositeAxes) {
  ParamStore store(4);
  MultiHeadAttention mha(store, "c", {2, 8});
  randomize_all(store, 4);
  const auto r = mha.cross_attention(random_tensor({5, 8}, 1), random_tensor({12, 8}, 2), true);
  for (std::size_t h = 0; h < 2; ++h) {
    const oracle::Mat a = oracle::of(r.maps.maps[h]), g = oracle::of(r.gated->maps[h]);
    for (std::size_t c = 0; c < 5; ++c) {
      double s = 0;
      for (std::size_t n = 0; n < 12; ++n) s += a(c, n);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    for (std::size_t n = 0; n < 12; ++n) {
      double s = 0;
      for (std::size_t c = 0; c < 5; ++c) s += g(c, n);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
  EXPECT_FALSE(mha.cross_attention(random_tensor({5, 8}, 1), random_tensor({12, 8}, 2), false).gated.has_value());
}

TEST(Attention, RejectsWidthMismatch) {
  ParamStore store(0);
  MultiHeadAttention mha(store, "a", {2, 8});
  EXPECT_THROW(mha.self_attention(random_tensor({3, 6}, 1)), ShapeError);
}

TEST(Attention, BlocksMatchOracle) {
  ParamStore store(9);
  EncoderBlock enc(store, "e", {2, 6}, 12);
  DecoderBlock dec(store, "d", {2, 6}, 12);
  randomize_all(store, 9);
  const Tensor x = random_tensor({7, 6}, 5), q = random_tensor({3, 6}, 6);
  const auto e = enc(x);
  oracle::Mat ox = oracle::of(x);
  const auto sa = oracle::attention(oracle::layernorm(ox, enc.norm1.gamma, enc.norm1.beta),
                                    oracle::layernorm(ox, enc.norm1.gamma, enc.norm1.beta), enc.attn);
  ox = oracle::add(ox, sa.out);
  ox = oracle::add(ox, oracle::mlp(oracle::layernorm(ox, enc.norm2.gamma, enc.norm2.beta), enc.mlp));
  EXPECT_LT(oracle::max_abs_diff(ox, e.tokens), 1e-12);

  const auto d = dec(q, x);
  oracle::Mat oq = oracle::of(q);
  const oracle::Mat n1 = oracle::layernorm(oq, dec.norm1.gamma, dec.norm1.beta);
  oq = oracle::add(oq, oracle::attention(n1, n1, dec.self_attn).out);
  const auto ca = oracle::attention(oracle::layernorm(oq, dec.norm2.gamma, dec.norm2.beta), oracle::of(x), dec.cross_attn);
  oq = oracle::add(oq, ca.out);
  oq = oracle::add(oq, oracle::mlp(oracle::layernorm(oq, dec.norm3.gamma, dec.norm3.beta), dec.mlp));
  EXPECT_LT(oracle::max_abs_diff(oq, d.queries), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(ca.gated[1], d.cross_gated.maps[1]), 1e-14);
}

TEST(Attention, ParameterGradients) {
  ParamStore store(11);
  MultiHeadAttention mha(store, "a", {2, 4});
  randomize_all(store, 11);
  const Tensor x = random_tensor({5, 4}, 12, -1, 1, true), q = random_tensor({3, 4}, 13, -1, 1, true);
  const Tensor w = random_tensor({5, 4}, 14), wc = random_tensor({3, 4}, 15);
  std::vector<Tensor> inputs{x, q};
  for (const auto& p : store.params()) inputs.push_back(p.tensor);
  const auto r = gradcheck::check(
      [&] {
        const auto s = mha.self_attention(x);
        const auto c = mha.cross_attention(q, x, true);
        // Include the maps so their gradient paths are exercised too.
        return add(add(sum(mul(s.out, w)), sum(mul(c.out, wc))),
                   add(sum(mul(s.maps.maps[0], s.maps.maps[1])), sum(mul(c.gated->maps[0], c.maps.maps[1]))));
      },
      inputs);
  EXPECT_TRUE(r.ok) << r.detail;
}
