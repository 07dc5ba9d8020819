#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tsg/tensor.hpp"

namespace tsg {

enum class Init {
  Zeros,
  Ones,
  Xavier,    // uniform, ±sqrt(6 / (fan_in + fan_out)) for 2-D weights
  Normal02,  // N(0, 0.02²)
};

struct Parameter {
  std::string name;
  Tensor tensor;
};

/// Owns the trainable tensors of a model, keyed by dotted path names.
///
/// Initial values depend only on (seed, name), so two models built from the
/// same seed agree on every parameter they have in common.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  Tensor add(const std::string& name, Shape shape, Init init);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;

  const std::vector<Parameter>& params() const { return params_; }
  std::size_t scalar_count() const;
  void zero_grad();

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace tsg
