// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "xrmbt/nn.hpp"
#include "xrmbt/tensor.hpp"

namespace xrmbt::opt {

/// Bias-corrected Adam. Moment buffers live in the working precision; the
/// per-element update is evaluated in double to keep tiny steps from
/// flushing to zero.
template <typename T>
struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::vector<ad::Tensor<T>> m;
  std::vector<ad::Tensor<T>> v;

  void init(const nn::ParamStore<T>& ps) {
    t = 0;
    m.clear();
    v.clear();
    for (const auto& e : ps.entries) {
      m.push_back(ad::Tensor<T>::zeros(e.value.shape));
      v.push_back(ad::Tensor<T>::zeros(e.value.shape));
    }
  }

  void step(nn::ParamStore<T>& ps, const std::vector<ad::Tensor<T>>& grads) {
    if (m.size() != ps.entries.size() || grads.size() != ps.entries.size())
      throw std::invalid_argument("adam state/grads do not match parameter store");
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t k = 0; k < ps.entries.size(); ++k) {
      auto& p = ps.entries[k].value;
      const auto& g = grads[k];
      if (!p.same_shape(g))
        throw std::invalid_argument("adam gradient shape mismatch for " + ps.entries[k].name +
                                    ": " + ad::shape_str(p.shape) + " vs " +
                                    ad::shape_str(g.shape));
      for (size_t i = 0; i < p.data.size(); ++i) {
        const double gi = static_cast<double>(g.data[i]);
        const double mi = beta1 * static_cast<double>(m[k].data[i]) + (1.0 - beta1) * gi;
        const double vi = beta2 * static_cast<double>(v[k].data[i]) + (1.0 - beta2) * gi * gi;
        m[k].data[i] = static_cast<T>(mi);
        v[k].data[i] = static_cast<T>(vi);
        const double mhat = mi / c1;
        const double vhat = vi / c2;
        p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) -
                                   lr * mhat / (std::sqrt(vhat) + eps));
      }
    }
  }
};

}  // namespace xrmbt::opt
