#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tsg/tensor.hpp"

namespace gradcheck {

struct Report {
  bool ok = true;
  double worst = 0;  // largest |a-n| / (abs_tol + rel_tol*max(|a|,|n|)); ok iff <= 1
  std::string detail;
};

// Central differences on every element of every input against backward().
// `f` must return a scalar and be rebuilt from scratch on each call.
inline Report check(const std::function<tsg::Tensor()>& f, std::vector<tsg::Tensor> inputs, double h = 1e-6,
                    double rel_tol = 1e-6, double abs_tol = 1e-8) {
  for (auto& t : inputs) t.zero_grad();
  f().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    std::vector<double> g(t.numel(), 0.0);
    if (t.has_grad())
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = t.grad()[i];
    analytic.push_back(g);
  }
  Report r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const tsg::Real saved = data[i];
      data[i] = saved + h;
      const double up = f().item();
      data[i] = saved - h;
      const double down = f().item();
      data[i] = saved;
      const double num = (up - down) / (2 * h), a = analytic[k][i];
      const double score = std::abs(a - num) / (abs_tol + rel_tol * std::max(std::abs(a), std::abs(num)));
      if (score > r.worst) {
        r.worst = score;
        std::ostringstream os;
        os << "input " << k << " element " << i << ": analytic " << a << ", numeric " << num;
        r.detail = os.str();
      }
    }
  }
  r.ok = r.worst <= 1.0;
  return r;
}

}  // namespace gradcheck
