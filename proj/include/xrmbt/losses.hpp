// SPDX-License-Identifier: Apache-2.0
//
// Training losses: rotation/position MSE, categorical cross-entropy for the
// registration, the naive point-to-surface loss, and the semantic hinge loss
// on support-gated joint centroids. Plain versions (double accumulation) are
// the evaluation path; graph builders mirror them for training.
#pragma once

#include <string>
#include <vector>

#include "xrmbt/fk.hpp"
#include "xrmbt/graph.hpp"
#include "xrmbt/sensor.hpp"
#include "xrmbt/skeleton.hpp"

namespace xrmbt::loss {

using body::BodyShape;
using body::Pose;
using body::Skeleton;
using body::Vec3f;

struct LossWeights {
  float w_rot = 1.0f;
  float w_pos = 0.01f;
  float w_ce = 0.1f;
  float w_spc = 0.01f;
};

inline constexpr float kSpcTheta = 0.10f;       // meters
inline constexpr double kSupportGate = 0.05;    // active iff support > gate*P
inline constexpr float kSupportEps = 1e-12f;    // guards centroid division

/// Mean over frames and joints of the squared L2 norm of the 6D rotation
/// difference.
double rot_mse(const std::vector<Pose>& z, const std::vector<Pose>& gt);

/// Mean over frames and joints of the squared distance between FK joint
/// positions (default scale).
double pos_mse(const Skeleton& s, const std::vector<Pose>& z, const std::vector<Pose>& gt);

/// Mean over frames and points of -log prob of the true class.
double ce_loss(const std::vector<ad::Tensor<float>>& probs_seq,
               const std::vector<std::vector<int>>& labels_seq);

/// Mean over frames and points of the distance to the nearest capsule
/// surface of the posed body (0 inside).
double pc_loss(const Skeleton& s, const BodyShape& shape,
               const std::vector<std::vector<Vec3f>>& clouds_world,
               const std::vector<Pose>& z);

struct JointEvidence {
  std::vector<double> support;               // per joint, background excluded
  std::vector<geom::Vec3<double>> centroid;  // defined where support > 0
  std::vector<char> active;                  // support > kSupportGate * P
};

JointEvidence joint_evidence(const std::vector<Vec3f>& pts_world,
                             const ad::Tensor<float>& probs, int J);

/// Per-frame mean over the active set of max(0, ||pos_j - cen_j|| - theta),
/// then mean over frames with nonempty active sets (0 if none).
double spc_loss(const std::vector<JointEvidence>& evidence, const std::vector<Pose>& z,
                const Skeleton& s, float theta = kSpcTheta);

/// Weighted sum; throws std::runtime_error naming the first non-finite
/// component. Pseudo-real batches carry only the w_spc term.
double total_loss(double l_rot, double l_pos, double l_ce, double l_spc,
                  const LossWeights& w, bool mocap_domain);

namespace graph {

/// z6/gt6 are [B, J*6]; matches rot_mse.
template <typename T>
ad::NodeId rot_mse(ad::Graph<T>& g, ad::NodeId z6, ad::NodeId gt6) {
  ad::NodeId d = g.sub(z6, gt6);
  return g.scale(g.mean_all(g.mul(d, d)), T(6));
}

/// pos/gt_pos are [B, J*3]; matches pos_mse.
template <typename T>
ad::NodeId pos_mse(ad::Graph<T>& g, ad::NodeId pos, ad::NodeId gt_pos) {
  ad::NodeId d = g.sub(pos, gt_pos);
  return g.scale(g.mean_all(g.mul(d, d)), T(3));
}

/// Hinge between predicted joint positions [B,J*3] and centroids [B,J*3]
/// (constant node when evidence is detached, live node otherwise), summed
/// with per-(frame,joint) weights [B,J]. Weights fold in the active mask and
/// the per-frame/nonempty-frame normalization, so the result is the loss.
template <typename T>
ad::NodeId spc_hinge(ad::Graph<T>& g, ad::NodeId pos, ad::NodeId cen,
                     const ad::Tensor<T>& weights, float theta) {
  const int J = g.val(pos).cols() / 3;
  if (!weights.is_2d() || weights.rows() != g.val(pos).rows() || weights.cols() != J)
    throw std::invalid_argument("spc_hinge: weights must be [B,J]");
  ad::NodeId acc = -1;
  for (int j = 0; j < J; ++j) {
    ad::NodeId d = g.sub(g.slice_cols(pos, 3 * j, 3 * j + 3),
                         g.slice_cols(cen, 3 * j, 3 * j + 3));
    ad::NodeId norm = g.sqrt(g.shift(g.row_sum(g.mul(d, d)), T(nn::kNormEps)));
    ad::NodeId hinge = g.relu(g.shift(norm, static_cast<T>(-theta)));
    ad::Tensor<T> wcol = ad::Tensor<T>::zeros({weights.rows(), 1});
    for (int b = 0; b < weights.rows(); ++b) wcol.at(b, 0) = weights.at(b, j);
    ad::NodeId term = g.mul(hinge, g.constant(std::move(wcol)));
    acc = acc < 0 ? term : g.add(acc, term);
  }
  return g.sum_all(acc);
}

template <typename T>
struct EvidenceNodes {
  ad::NodeId support = -1;  // [B, J]
  ad::NodeId cen = -1;      // [B, J*3]
};

/// Support and probability-weighted centroids built from the registration
/// node itself (gradients flow into the probabilities).
template <typename T>
EvidenceNodes<T> evidence_graph(ad::Graph<T>& g, ad::NodeId probs, const ad::Tensor<T>& points,
                                int P, int J) {
  const auto& tp = g.val(probs);
  if (!tp.is_2d() || tp.cols() != J + 1 || tp.rows() % P != 0)
    throw std::invalid_argument("evidence_graph: probs must be [B*P,J+1]");
  if (points.rows() != tp.rows() || points.cols() != 3)
    throw std::invalid_argument("evidence_graph: points must be [B*P,3]");
  ad::NodeId pts = g.constant(points);
  std::vector<ad::NodeId> sup_cols, cen_cols;
  for (int j = 0; j < J; ++j) {  // background class J excluded
    ad::NodeId col = g.slice_cols(probs, j, j + 1);
    ad::NodeId sup = g.scale(g.mean_pool_rows(col, P), static_cast<T>(P));
    ad::NodeId wsum =
        g.scale(g.mean_pool_rows(g.mul(g.tile_cols(col, 3), pts), P), static_cast<T>(P));
    ad::NodeId cen = g.div(wsum, g.tile_cols(g.shift(sup, T(kSupportEps)), 3));
    sup_cols.push_back(sup);
    cen_cols.push_back(cen);
  }
  EvidenceNodes<T> out;
  out.support = g.concat_cols(sup_cols);
  out.cen = g.concat_cols(cen_cols);
  return out;
}

}  // namespace graph

/// Active-set weights for spc_hinge: weight(b,j) = active(b,j) /
/// (|active row b| * #nonempty rows). Support is [B,J] (plain values).
ad::Tensor<float> spc_weights(const ad::Tensor<float>& support, int P);

}  // namespace xrmbt::loss
