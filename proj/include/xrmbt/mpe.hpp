// SPDX-License-Identifier: Apache-2.0
//
// Residual pose refiner: per frame, (tracked 54, synthesized pose J*6,
// global cloud feature 128) -> rotation offset J*6, added to the synthesized
// pose in 6D space. The final layer starts at zero so the untrained refiner
// is exactly the identity on the synthesized pose.
#pragma once

#include <random>
#include <stdexcept>

#include "xrmbt/graph.hpp"
#include "xrmbt/nn.hpp"

namespace xrmbt::net {

struct MpeConfig {
  int x_dim = 54;
  int J = 22;
  int f_dim = 128;
  int hidden = 256;

  int in_dim() const { return x_dim + J * 6 + f_dim; }
};

inline void mpe_init(nn::ParamStore<float>& ps, const MpeConfig& c, std::mt19937& rng) {
  nn::add_linear(ps, "mpe.l1", c.in_dim(), c.hidden, rng);
  nn::add_linear(ps, "mpe.l2", c.hidden, c.hidden, rng);
  nn::add_linear_zero(ps, "mpe.out", c.hidden, c.J * 6);
}

/// Refined pose rows [B, J*6]: y + mpe(x, y, f).
template <typename T>
ad::NodeId mpe_refine(ad::Graph<T>& g, const MpeConfig& c, const nn::ParamStore<T>& ps,
                      const std::vector<ad::NodeId>& bound, ad::NodeId x, ad::NodeId y,
                      ad::NodeId f) {
  const auto& ty = g.val(y);
  if (!ty.is_2d() || ty.cols() != c.J * 6)
    throw std::invalid_argument("mpe_refine: y must be [B,J*6], got " +
                                ad::shape_str(ty.shape));
  if (g.val(x).cols() != c.x_dim || g.val(f).cols() != c.f_dim)
    throw std::invalid_argument("mpe_refine: x/f width mismatch");
  ad::NodeId in = g.concat_cols({x, y, f});
  ad::NodeId h = nn::linear_relu(g, in, nn::linear_ref(ps, bound, "mpe.l1"));
  h = nn::linear_relu(g, h, nn::linear_ref(ps, bound, "mpe.l2"));
  ad::NodeId offset = nn::linear(g, h, nn::linear_ref(ps, bound, "mpe.out"));
  return g.add(y, offset);
}

}  // namespace xrmbt::net
