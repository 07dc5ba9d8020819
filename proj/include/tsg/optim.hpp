#pragma once

#include <cstdint>
#include <vector>

#include "tsg/params.hpp"

namespace tsg {

struct AdamWConfig {
  double lr = 1e-3;  // overwritten by the schedule each step
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Decoupled weight decay (p -= lr*wd*p) followed by a bias-corrected Adam
/// step. Moments live in double regardless of the tensor precision.
class AdamW {
 public:
  AdamW(const ParamStore& store, AdamWConfig cfg);

  void step(const ParamStore& store);
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  std::uint64_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

double poly_lr(std::uint64_t step, std::uint64_t total, double lr0, double power = 0.9);

}  // namespace tsg
