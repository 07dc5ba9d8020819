#include "tsg/model.hpp"

#include <algorithm>

namespace tsg {

namespace {

DecoderConfig decoder_config(const ModelConfig& cfg) {
  DecoderConfig d;
  d.d_f = cfg.d_f;
  d.heads = cfg.dec_heads;
  d.blocks = cfg.dec_blocks;
  d.classes = cfg.classes;
  d.mlp_ratio = cfg.mlp_ratio;
  d.fusion = cfg.decoder_fusion;
  d.tsg = cfg.tsg;
  d.shared_gates = cfg.shared_gates;
  return d;
}

const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

std::vector<std::size_t> ModelConfig::resolved_decoder_scales() const {
  if (!decoder_scales.empty()) return decoder_scales;
  std::vector<std::size_t> all(encoder.num_stages());
  for (std::size_t s = 0; s < all.size(); ++s) all[s] = s + 1;
  return all;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (classes < 1) throw Error("model: classes must be positive");
  MhaConfig{dec_heads, d_f}.validate();
  if (tsg.d_a == 0 || tsg.hidden == 0) throw Error("model: gate widths must be positive");
  for (std::size_t s : decoder_scales) {
    if (s < 1 || s > encoder.num_stages()) throw Error("model: decoder scale " + std::to_string(s) + " out of range");
  }
  if (!decoder_scales.empty() && encoder_fusion != EncoderFusion::Linear) {
    throw Error("model: a decoder scale subset requires linear refinement (top-down fusion mixes every scale)");
  }
}

SegModel::SegModel(const ModelConfig& cfg)
    : cfg_(validated(cfg)),
      store_(cfg.seed),
      backbone_(store_, cfg_.encoder),
      tsge_(store_, cfg_.encoder, cfg_.d_f, cfg_.tsg, cfg_.encoder_fusion, cfg_.shared_gates,
            cfg_.resolved_decoder_scales()),
      decoder_(store_, decoder_config(cfg_), cfg_.resolved_decoder_scales().size()) {}

ForwardResult SegModel::forward(const Tensor& image) const {
  ForwardResult r;
  r.backbone = backbone_.run(image);
  r.encoder = tsge_.fuse(r.backbone.features, r.backbone.last_maps, cfg_.gate_mode);
  r.grid = cfg_.encoder.grid(1);
  std::vector<FeatureMap> used;
  for (std::size_t s : cfg_.resolved_decoder_scales()) used.push_back(r.encoder.refined[s - 1]);
  const auto features_up = Decoder::upsample_features(used, r.grid);
  r.decoder = decoder_.run(features_up, cfg_.gate_mode);
  r.scores = class_scores(r.decoder.memory_last(), r.decoder.y);
  return r;
}

Tensor SegModel::loss(const Tensor& image, std::span<const int> patch_labels) const {
  return cross_entropy(forward(image).scores, patch_labels);
}

Baseline Baseline::parse(const std::string& name) {
  static const std::vector<std::pair<std::string, Kind>> kNames{
      {"tsg", Kind::Tsg},           {"fpn_sum", Kind::FpnSum},         {"plain_sum", Kind::PlainSum},
      {"tsge_base", Kind::TsgeOnly}, {"plain_tsgd", Kind::TsgdOnly},     {"fpn_tsgd", Kind::FpnTsgd},
      {"tsg_shared", Kind::TsgShared}, {"tsg_head_avg", Kind::TsgHeadAverage}};
  for (const auto& [n, k] : kNames) {
    if (n == name) return {k, 0};
  }
  // single_scale:N or single_scale(N)
  const std::string prefix = "single_scale";
  if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size() + 1) {
    std::string digits = name.substr(prefix.size() + 1);
    if (!digits.empty() && digits.back() == ')') digits.pop_back();
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const std::size_t s = std::stoul(digits);
      if (s >= 1) return {Kind::SingleScale, s};
    }
  }
  throw Error("unknown baseline kind '" + name + "'");
}

std::string Baseline::name() const {
  switch (kind) {
    case Kind::Tsg: return "tsg";
    case Kind::FpnSum: return "fpn_sum";
    case Kind::PlainSum: return "plain_sum";
    case Kind::SingleScale: return "single_scale:" + std::to_string(scale);
    case Kind::TsgeOnly: return "tsge_base";
    case Kind::TsgdOnly: return "plain_tsgd";
    case Kind::FpnTsgd: return "fpn_tsgd";
    case Kind::TsgShared: return "tsg_shared";
    case Kind::TsgHeadAverage: return "tsg_head_avg";
  }
  return "?";
}

ModelConfig make_baseline(const Baseline& baseline, ModelConfig base) {
  base.decoder_scales.clear();
  base.shared_gates = false;
  base.tsg.head_average = false;
  switch (baseline.kind) {
    case Baseline::Kind::Tsg:
      base.encoder_fusion = EncoderFusion::Tsge;
      base.decoder_fusion = DecoderFusion::Tsgd;
      break;
    case Baseline::Kind::FpnSum:
      base.encoder_fusion = EncoderFusion::Fpn;
      base.decoder_fusion = DecoderFusion::Uniform;
      break;
    case Baseline::Kind::PlainSum:
      base.encoder_fusion = EncoderFusion::Linear;
      base.decoder_fusion = DecoderFusion::Sum;
      break;
    case Baseline::Kind::SingleScale:
      if (baseline.scale < 1 || baseline.scale > base.encoder.num_stages()) {
        throw Error("single_scale: scale " + std::to_string(baseline.scale) + " outside 1.." +
                    std::to_string(base.encoder.num_stages()));
      }
      // Stages past the chosen one cannot influence the output; drop them.
      base.encoder.stages.resize(baseline.scale);
      base.encoder_fusion = EncoderFusion::Linear;
      base.decoder_fusion = DecoderFusion::Sum;
      base.decoder_scales = {baseline.scale};
      break;
    case Baseline::Kind::TsgeOnly:
      base.encoder_fusion = EncoderFusion::Tsge;
      base.decoder_fusion = DecoderFusion::Uniform;
      break;
    case Baseline::Kind::TsgdOnly:
      base.encoder_fusion = EncoderFusion::Linear;
      base.decoder_fusion = DecoderFusion::Tsgd;
      break;
    case Baseline::Kind::FpnTsgd:
      base.encoder_fusion = EncoderFusion::Fpn;
      base.decoder_fusion = DecoderFusion::Tsgd;
      break;
    case Baseline::Kind::TsgShared:
      base.encoder_fusion = EncoderFusion::Tsge;
      base.decoder_fusion = DecoderFusion::Tsgd;
      base.shared_gates = true;
      break;
    case Baseline::Kind::TsgHeadAverage:
      base.encoder_fusion = EncoderFusion::Tsge;
      base.decoder_fusion = DecoderFusion::Tsgd;
      base.tsg.head_average = true;
      break;
  }
  return base;
}

}  // namespace tsg
