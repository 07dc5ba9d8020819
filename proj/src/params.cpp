#include "tsg/params.hpp"

#include <algorithm>
#include <cmath>

#include "tsg/rng.hpp"

namespace tsg {

Tensor ParamStore::add(const std::string& name, Shape shape, Init init) {
  if (contains(name)) throw Error("parameter '" + name + "' registered twice");
  const std::size_t n = shape_numel(shape);
  std::vector<Real> values(n, Real(0));
  const CounterRng rng(hash_combine(seed_, hash_string(name)));
  switch (init) {
    case Init::Zeros:
      break;
    case Init::Ones:
      std::fill(values.begin(), values.end(), Real(1));
      break;
    case Init::Xavier: {
      const double fan_in = shape.size() == 2 ? double(shape[0]) : double(n);
      const double fan_out = shape.size() == 2 ? double(shape[1]) : double(n);
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<Real>(rng.uniform(0, i, -bound, bound));
      break;
    }
    case Init::Normal02:
      for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<Real>(0.02 * rng.normal(0, i));
      break;
  }
  Tensor t = Tensor::from_data(std::move(shape), std::move(values), true);
  index_.emplace(name, params_.size());
  params_.push_back({name, t});
  return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
  return params_[it->second].tensor;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace tsg
