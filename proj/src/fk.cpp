// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/fk.hpp"

#include <stdexcept>

namespace xrmbt::body {

FkResult fk(const Skeleton& s, const Pose& pose, float scale) {
  if (static_cast<int>(pose.local_rot.size()) != s.J)
    throw std::invalid_argument("fk: pose has " + std::to_string(pose.local_rot.size()) +
                                " rotations for a " + std::to_string(s.J) + "-joint skeleton");
  FkResult r;
  r.pos.resize(s.J);
  r.world_rot.resize(s.J);
  const Mat3f root_m = geom::rot6d_to_matrix(pose.root_rot);
  for (int j = 0; j < s.J; ++j) {
    const Mat3f local = geom::rot6d_to_matrix(pose.local_rot[j]);
    if (j == 0) {
      r.world_rot[0] = root_m * local;
      r.pos[0] = pose.root_pos;
      continue;
    }
    const int p = s.parent[j];
    r.world_rot[j] = r.world_rot[p] * local;
    r.pos[j] = r.pos[p] + r.world_rot[p] * (s.bone_offset[j] * scale);
  }
  return r;
}

Vec3f rest_head_offset(const Skeleton& s, float scale) {
  Vec3f off{0, 0, 0};
  int j = kHead;
  while (j != 0) {
    off += s.bone_offset[j] * scale;
    j = s.parent[j];
  }
  return off;
}

void derive_root_from_head(const Skeleton& s, const Vec3f& head_pos, const Mat3f& head_rot,
                           float scale, Vec3f& root_pos_out, Rot6f& root_rot_out) {
  // With identity spine locals: head_rot = root_rot, head_pos = root_pos +
  // root_rot * rest_head_offset.
  const Vec3f chain = rest_head_offset(s, scale);
  root_rot_out = geom::matrix_to_rot6d(head_rot);
  root_pos_out = head_pos - head_rot * chain;
}

ad::Tensor<float> poses_to_rot6_rows(const std::vector<Pose>& poses) {
  const int B = static_cast<int>(poses.size());
  const int J = B > 0 ? static_cast<int>(poses[0].local_rot.size()) : 0;
  ad::Tensor<float> t = ad::Tensor<float>::zeros({B, J * 6});
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < 6; ++k) t.at(b, 6 * j + k) = poses[b].local_rot[j].v[k];
  return t;
}

ad::Tensor<float> poses_to_root_pos_rows(const std::vector<Pose>& poses) {
  const int B = static_cast<int>(poses.size());
  ad::Tensor<float> t = ad::Tensor<float>::zeros({B, 3});
  for (int b = 0; b < B; ++b) {
    t.at(b, 0) = poses[b].root_pos.x;
    t.at(b, 1) = poses[b].root_pos.y;
    t.at(b, 2) = poses[b].root_pos.z;
  }
  return t;
}

ad::Tensor<float> poses_to_root_rot_rows(const std::vector<Pose>& poses) {
  const int B = static_cast<int>(poses.size());
  ad::Tensor<float> t = ad::Tensor<float>::zeros({B, 9});
  for (int b = 0; b < B; ++b) {
    const Mat3f m = geom::rot6d_to_matrix(poses[b].root_rot);
    for (int k = 0; k < 9; ++k) t.at(b, k) = m.m[k];
  }
  return t;
}

std::vector<Pose> rows_to_poses(const ad::Tensor<float>& rot6, const ad::Tensor<float>& root_pos,
                                const ad::Tensor<float>& root_rot9) {
  const int B = rot6.rows();
  const int J = rot6.cols() / 6;
  if (root_pos.rows() != B || root_rot9.rows() != B)
    throw std::invalid_argument("rows_to_poses: row count mismatch");
  std::vector<Pose> out(B);
  for (int b = 0; b < B; ++b) {
    out[b].local_rot.resize(J);
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < 6; ++k) out[b].local_rot[j].v[k] = rot6.at(b, 6 * j + k);
    out[b].root_pos = {root_pos.at(b, 0), root_pos.at(b, 1), root_pos.at(b, 2)};
    Mat3f m;
    for (int k = 0; k < 9; ++k) m.m[k] = root_rot9.at(b, k);
    out[b].root_rot = geom::matrix_to_rot6d(m);
  }
  return out;
}

}  // namespace xrmbt::body
