#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "vcr/tensor.hpp"

namespace vcr {

// Central differences of a scalar function at x.
inline Tensor numeric_gradient(const std::function<double(const Tensor&)>& fn, const Tensor& x,
                               double step = 1e-5) {
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = probe.values()[k];
    probe.values()[k] = orig + step;
    const double up = fn(probe);
    probe.values()[k] = orig - step;
    const double down = fn(probe);
    probe.values()[k] = orig;
    grad.values()[k] = (up - down) / (2.0 * step);
  }
  return grad;
}

// max_k |a_k - b_k| / max(|a_k|, |b_k|, floor)
inline double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double x = a.values()[k], y = b.values()[k];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
  }
  return worst;
}

}  // namespace vcr
