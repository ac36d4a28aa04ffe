// SPDX-License-Identifier: Apache-2.0
//
// Semantic point-cloud network: a per-point PointNet-style encoder with a
// max-pooled 128-d global feature, and a per-point decoder conditioned on a
// causal running mean of previous global features plus the tracked 54-d
// input, emitting (J+1)-class probabilities.
#pragma once

#include <array>
#include <random>
#include <stdexcept>
#include <vector>

#include "xrmbt/graph.hpp"
#include "xrmbt/nn.hpp"

namespace xrmbt::net {

struct SpcConfig {
  int P = 100;
  int J = 22;
  int x_dim = 54;
  int enc_h1 = 64;
  int enc_h2 = 128;  // also the global feature width
  int dec_h = 128;

  int classes() const { return J + 1; }
};

inline void spc_init(nn::ParamStore<float>& ps, const SpcConfig& c, std::mt19937& rng) {
  nn::add_linear(ps, "spc.enc1", 3 + c.x_dim, c.enc_h1, rng);
  nn::add_linear(ps, "spc.enc2", c.enc_h1, c.enc_h2, rng);
  nn::add_linear(ps, "spc.dec1", c.enc_h2 + c.enc_h2 + c.x_dim, c.dec_h, rng);
  nn::add_linear(ps, "spc.dec2", c.dec_h, c.classes(), rng);
}

/// Encoder params only (ablation modes without the decoder still feed the
/// global feature to the pose refiner).
inline void spc_init_encoder(nn::ParamStore<float>& ps, const SpcConfig& c, std::mt19937& rng) {
  nn::add_linear(ps, "spc.enc1", 3 + c.x_dim, c.enc_h1, rng);
  nn::add_linear(ps, "spc.enc2", c.enc_h1, c.enc_h2, rng);
}

template <typename T>
struct SpcNodes {
  ad::NodeId local = -1;    // [B*P, enc_h2] per-point features
  ad::NodeId global = -1;   // [B, enc_h2] max-pooled per frame
  ad::NodeId history = -1;  // [B, enc_h2] causal mean of previous globals
  ad::NodeId probs = -1;    // [B*P, J+1], -1 when the decoder is absent
};

/// Encoder over a window of B frames stacked row-major (frame-major, block
/// size `window` per sequence for the causal history). `points` is [B*P, 3]
/// sensor-normalized, `x` is [B, x_dim].
template <typename T>
SpcNodes<T> spc_encode(ad::Graph<T>& g, const SpcConfig& c, const nn::ParamStore<T>& ps,
                       const std::vector<ad::NodeId>& bound, ad::NodeId points, ad::NodeId x,
                       int window) {
  const auto& tp = g.val(points);
  const auto& tx = g.val(x);
  if (!tp.is_2d() || tp.cols() != 3 || tp.rows() != tx.rows() * c.P)
    throw std::invalid_argument("spc_encode: points must be [B*P,3] with P=" +
                                std::to_string(c.P) + ", got " + ad::shape_str(tp.shape));
  if (tx.cols() != c.x_dim)
    throw std::invalid_argument("spc_encode: x must be [B," + std::to_string(c.x_dim) +
                                "], got " + ad::shape_str(tx.shape));
  if (window <= 0 || tx.rows() % window != 0)
    throw std::invalid_argument("spc_encode: window must divide the frame count");

  SpcNodes<T> out;
  ad::NodeId enc_in = g.concat_cols(points, g.repeat_rows(x, c.P));
  ad::NodeId h = nn::linear_relu(g, enc_in, nn::linear_ref(ps, bound, "spc.enc1"));
  out.local = nn::linear_relu(g, h, nn::linear_ref(ps, bound, "spc.enc2"));
  out.global = g.max_pool_rows(out.local, c.P);
  out.history = g.causal_mean_rows(out.global, window);
  return out;
}

/// Decoder on top of spc_encode (requires spc.dec* params bound).
template <typename T>
void spc_decode(ad::Graph<T>& g, const SpcConfig& c, const nn::ParamStore<T>& ps,
                const std::vector<ad::NodeId>& bound, ad::NodeId x, SpcNodes<T>& nodes) {
  ad::NodeId dec_in = g.concat_cols(
      {nodes.local, g.repeat_rows(nodes.history, c.P), g.repeat_rows(x, c.P)});
  ad::NodeId h = nn::linear_relu(g, dec_in, nn::linear_ref(ps, bound, "spc.dec1"));
  nodes.probs = g.softmax_rows(nn::linear(g, h, nn::linear_ref(ps, bound, "spc.dec2")));
}

/// Single-frame registration against an externally maintained history pool
/// (zeros before the first frame).
struct Registration {
  ad::Tensor<float> probs;           // [P, J+1]
  std::vector<float> global_feature; // enc_h2
};

Registration spc_forward(const SpcConfig& c, const nn::ParamStore<float>& ps,
                         const std::vector<float>& x_frame,
                         const std::vector<std::array<float, 3>>& cloud,
                         const std::vector<float>& history_pool);

/// Whole-sequence causal inference; probs per frame plus per-frame global
/// features. When the store lacks decoder weights only globals are produced.
struct SequenceRegistration {
  std::vector<ad::Tensor<float>> probs;               // N x [P, J+1] (may be empty)
  std::vector<std::vector<float>> global_features;    // N x enc_h2
};

SequenceRegistration spc_sequence(const SpcConfig& c, const nn::ParamStore<float>& ps,
                                  const ad::Tensor<float>& x_rows,
                                  const ad::Tensor<float>& point_rows);

}  // namespace xrmbt::net
