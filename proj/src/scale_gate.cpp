#include "tsg/scale_gate.hpp"

namespace tsg {

ScaleGate::ScaleGate(ParamStore& store, const std::string& prefix, const TsgConfig& cfg,
                     std::vector<MapSource> sources, std::size_t num_scales)
    : norm(store, prefix + ".norm", cfg.d_a),
      mlp(store, prefix + ".mlp", cfg.d_a, cfg.hidden, num_scales),
      cfg_(cfg),
      num_scales_(num_scales) {
  if (num_scales < 1) throw Error("scale gate: need at least one scale");
  for (const MapSource& src : sources) {
    const std::string name = prefix + ".integrate" + (src.stage ? std::to_string(src.stage) : std::string("_cross"));
    const std::size_t in = cfg.head_average ? src.width : src.heads * src.width;
    Projection p{src, store.add(name + ".w", {in, cfg.d_a}, Init::Xavier), Tensor()};
    if (cfg.integrate_bias) p.b = store.add(name + ".b", {cfg.d_a}, Init::Zeros);
    projections.push_back(std::move(p));
  }
}

const ScaleGate::Projection& ScaleGate::projection_for(std::size_t stage) const {
  for (const Projection& p : projections) {
    if (p.source.stage == stage) return p;
  }
  throw Error("scale gate: no projection for attention maps of stage " + std::to_string(stage));
}

Tensor ScaleGate::project(const Projection& p, const std::vector<Tensor>& maps) const {
  if (maps.size() != p.source.heads) {
    throw ShapeError("scale gate: expected " + std::to_string(p.source.heads) + " head maps, got " +
                     std::to_string(maps.size()));
  }
  Tensor stacked;
  if (maps.size() == 1) {
    stacked = maps.front();
  } else if (cfg_.head_average) {
    stacked = scale(add_n(maps), Real(1) / Real(maps.size()));
  } else {
    stacked = concat(maps, 1);
  }
  return p.b.defined() ? linear(stacked, p.w, p.b) : matmul(stacked, p.w);
}

Tensor ScaleGate::integrate_self_maps(std::span<const AttentionBundle> bundles) const {
  if (bundles.empty()) throw Error("scale gate: no attention maps to integrate");
  const std::size_t rows = bundles.front().maps.front().dim(0);
  std::vector<Tensor> terms;
  for (const AttentionBundle& b : bundles) {
    for (const Tensor& m : b.maps) {
      if (m.dim(0) != rows) {
        throw ShapeError("scale gate: attention maps of stage " + std::to_string(b.stage) + " have " +
                         std::to_string(m.dim(0)) + " rows, expected " + std::to_string(rows) +
                         " (resample before integrating)");
      }
    }
    terms.push_back(project(projection_for(b.stage), b.maps));
  }
  return terms.size() == 1 ? terms.front() : add_n(terms);
}

Tensor ScaleGate::integrate_cross_maps(const AttentionBundle& gated) const {
  if (gated.axis != SoftmaxAxis::Classes) {
    throw Error("scale gate: cross maps must be normalized over classes, got patch-axis softmax from '" +
                gated.source + "'");
  }
  std::vector<Tensor> transposed;
  for (const Tensor& m : gated.maps) transposed.push_back(transpose(m));
  return project(projection_for(0), transposed);
}

ScaleGates ScaleGate::gate(const Tensor& integrated) const {
  return {softmax(mlp(norm(integrated)), 1), num_scales_};
}

}  // namespace tsg
