#include "tsg/optim.hpp"

#include <cmath>

namespace tsg {

AdamW::AdamW(const ParamStore& store, AdamWConfig cfg) : cfg_(cfg) {
  for (const Parameter& p : store.params()) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::step(const ParamStore& store) {
  const auto& params = store.params();
  if (params.size() != m_.size()) throw Error("adamw: parameter set changed since construction");
  for (const Parameter& p : params) {
    if (!p.tensor.has_grad()) throw Error("adamw: missing gradient for parameter '" + p.name + "'");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    Real* w = t.mutable_data().data();
    const Real* g = t.grad().data();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double gj = g[j];
      m[j] = cfg_.beta1 * m[j] + (1 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1 - cfg_.beta2) * gj * gj;
      const double mhat = m[j] / bc1, vhat = v[j] / bc2;
      double p = double(w[j]);
      if (cfg_.weight_decay != 0) p *= decay;
      p -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      w[j] = static_cast<Real>(p);
    }
  }
}

double poly_lr(std::uint64_t step, std::uint64_t total, double lr0, double power) {
  if (total == 0) throw Error("poly_lr: total steps must be positive");
  if (step > total) throw Error("poly_lr: step " + std::to_string(step) + " beyond total " + std::to_string(total));
  return lr0 * std::pow(1.0 - double(step) / double(total), power);
}

}  // namespace tsg
