// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "xrmbt/graph.hpp"
#include "xrmbt/nn.hpp"
#include "xrmbt/skeleton.hpp"

namespace xrmbt::body {

struct FkResult {
  std::vector<Vec3f> pos;        // world, meters
  std::vector<Mat3f> world_rot;  // world orientation per joint
};

/// world(j) = world(parent) * local(j); root composes root_rot then local[0].
/// Child position = parent position + parent world rotation * (scale*offset).
FkResult fk(const Skeleton& s, const Pose& pose, float scale = 1.0f);

/// Head world transform of the rest pose with identity locals (used to derive
/// a root transform from tracked head data).
Vec3f rest_head_offset(const Skeleton& s, float scale = 1.0f);

/// Inverts the rest head chain: given a tracked head transform, recover the
/// root. Exact whenever the spine chain's local rotations are identity.
void derive_root_from_head(const Skeleton& s, const Vec3f& head_pos, const Mat3f& head_rot,
                           float scale, Vec3f& root_pos_out, Rot6f& root_rot_out);

/// Flattened [B, J*6] pose rows (local rotations only).
ad::Tensor<float> poses_to_rot6_rows(const std::vector<Pose>& poses);
/// Root positions [B,3] and root rotation matrices [B,9] as constants for FK.
ad::Tensor<float> poses_to_root_pos_rows(const std::vector<Pose>& poses);
ad::Tensor<float> poses_to_root_rot_rows(const std::vector<Pose>& poses);
/// Inverse of poses_to_*: reassemble Pose sequence from flattened rows.
std::vector<Pose> rows_to_poses(const ad::Tensor<float>& rot6, const ad::Tensor<float>& root_pos,
                                const ad::Tensor<float>& root_rot9);

namespace graph {

/// Differentiable batched FK. `rot6` is [B, J*6] local rotations (6D);
/// `root_pos` [B,3] and `root_rot` [B,9] are typically constants derived from
/// the tracked head. Returns joint positions [B, J*3].
template <typename T>
ad::NodeId fk_positions(ad::Graph<T>& g, const Skeleton& s, float scale, ad::NodeId rot6,
                        ad::NodeId root_pos, ad::NodeId root_rot) {
  const auto& tr = g.val(rot6);
  if (!tr.is_2d() || tr.cols() != s.J * 6)
    throw std::invalid_argument("fk_positions: rot6 must be [B,J*6], got " +
                                ad::shape_str(tr.shape));
  const int B = tr.rows();
  std::vector<ad::NodeId> wrot(s.J, -1), wpos(s.J, -1);
  for (int j = 0; j < s.J; ++j) {
    ad::NodeId local = nn::gram_schmidt6(g, g.slice_cols(rot6, 6 * j, 6 * j + 6));
    if (j == 0) {
      wrot[0] = g.rot_compose(root_rot, local);
      wpos[0] = root_pos;
      continue;
    }
    const int p = s.parent[j];
    wrot[j] = g.rot_compose(wrot[p], local);
    ad::Tensor<T> off = ad::Tensor<T>::zeros({B, 3});
    const Vec3f o = s.bone_offset[j] * scale;
    for (int r = 0; r < B; ++r) {
      off.at(r, 0) = static_cast<T>(o.x);
      off.at(r, 1) = static_cast<T>(o.y);
      off.at(r, 2) = static_cast<T>(o.z);
    }
    wpos[j] = g.add(wpos[p], g.rot_apply(wrot[p], g.constant(std::move(off))));
  }
  return g.concat_cols(wpos);
}

}  // namespace graph
}  // namespace xrmbt::body
