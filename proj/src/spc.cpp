// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/spc.hpp"

namespace xrmbt::net {

Registration spc_forward(const SpcConfig& c, const nn::ParamStore<float>& ps,
                         const std::vector<float>& x_frame,
                         const std::vector<std::array<float, 3>>& cloud,
                         const std::vector<float>& history_pool) {
  if (static_cast<int>(cloud.size()) != c.P)
    throw std::invalid_argument("spc_forward: expected P=" + std::to_string(c.P) +
                                " points, got " + std::to_string(cloud.size()));
  if (static_cast<int>(x_frame.size()) != c.x_dim)
    throw std::invalid_argument("spc_forward: bad x dimension");
  if (static_cast<int>(history_pool.size()) != c.enc_h2)
    throw std::invalid_argument("spc_forward: bad history pool dimension");

  ad::Graph<float> g;
  std::vector<ad::NodeId> bound;
  bound.reserve(ps.entries.size());
  for (const auto& e : ps.entries) bound.push_back(g.constant(e.value));

  ad::Tensor<float> pts = ad::Tensor<float>::zeros({c.P, 3});
  for (int i = 0; i < c.P; ++i)
    for (int k = 0; k < 3; ++k) pts.at(i, k) = cloud[i][k];
  ad::Tensor<float> x = ad::Tensor<float>::zeros({1, c.x_dim});
  for (int k = 0; k < c.x_dim; ++k) x.at(0, k) = x_frame[k];

  const ad::NodeId xn = g.constant(std::move(x));
  SpcNodes<float> nodes = spc_encode(g, c, ps, bound, g.constant(std::move(pts)), xn, 1);
  // single frame: the causal pool is all zeros; substitute the provided one
  ad::Tensor<float> hist = ad::Tensor<float>::zeros({1, c.enc_h2});
  for (int k = 0; k < c.enc_h2; ++k) hist.at(0, k) = history_pool[k];
  nodes.history = g.constant(std::move(hist));
  spc_decode(g, c, ps, bound, xn, nodes);

  Registration r;
  r.probs = g.val(nodes.probs);
  const ad::Tensor<float>& gf = g.val(nodes.global);
  r.global_feature.assign(gf.data.begin(), gf.data.end());
  return r;
}

SequenceRegistration spc_sequence(const SpcConfig& c, const nn::ParamStore<float>& ps,
                                  const ad::Tensor<float>& x_rows,
                                  const ad::Tensor<float>& point_rows) {
  const int n = x_rows.rows();
  const bool has_decoder = ps.find("spc.dec1.w") >= 0;

  ad::Graph<float> g;
  std::vector<ad::NodeId> bound;
  bound.reserve(ps.entries.size());
  for (const auto& e : ps.entries) bound.push_back(g.constant(e.value));

  SpcNodes<float> nodes =
      spc_encode(g, c, ps, bound, g.constant(point_rows), g.constant(x_rows), n);
  if (has_decoder) spc_decode(g, c, ps, bound, g.constant(x_rows), nodes);

  SequenceRegistration out;
  const ad::Tensor<float>& gf = g.val(nodes.global);
  out.global_features.resize(n);
  for (int t = 0; t < n; ++t)
    out.global_features[t].assign(gf.data.begin() + static_cast<size_t>(t) * c.enc_h2,
                                  gf.data.begin() + static_cast<size_t>(t + 1) * c.enc_h2);
  if (has_decoder) {
    const ad::Tensor<float>& pr = g.val(nodes.probs);
    out.probs.resize(n);
    for (int t = 0; t < n; ++t) {
      ad::Tensor<float> frame = ad::Tensor<float>::zeros({c.P, c.classes()});
      for (int i = 0; i < c.P; ++i)
        for (int k = 0; k < c.classes(); ++k) frame.at(i, k) = pr.at(t * c.P + i, k);
      out.probs[t] = std::move(frame);
    }
  }
  return out;
}

}  // namespace xrmbt::net
