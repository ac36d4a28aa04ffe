// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "xrmbt/geometry.hpp"

namespace xrmbt::body {

using Vec3f = geom::Vec3<float>;
using Mat3f = geom::Mat3<float>;
using Rot6f = geom::Rot6<float>;

struct Skeleton {
  int J = 0;
  std::vector<int> parent;        // parent[0] == 0 (root points at itself)
  std::vector<Vec3f> bone_offset; // rest-pose offset from parent, meters
  std::vector<std::string> name;

  void validate() const;  // throws std::invalid_argument on a malformed tree
};

/// Per-bone capsule radii, indexed by child joint (index 0 unused), plus a
/// global bone-length scale.
struct BodyShape {
  std::vector<float> radius;
  float scale = 1.0f;

  void validate(int J) const;  // radii in [0.02,0.20], scale in [0.85,1.15]
};

struct Pose {
  std::vector<Rot6f> local_rot;  // J entries
  Vec3f root_pos;
  Rot6f root_rot;

  static Pose rest(int J) {
    Pose p;
    p.local_rot.assign(J, Rot6f::identity());
    return p;
  }
};

// Joint indices of the default 22-joint skeleton.
enum JointId : int {
  kPelvis = 0,
  kHipL = 1,
  kHipR = 2,
  kSpine1 = 3,
  kKneeL = 4,
  kKneeR = 5,
  kSpine2 = 6,
  kAnkleL = 7,
  kAnkleR = 8,
  kSpine3 = 9,
  kFootL = 10,
  kFootR = 11,
  kNeck = 12,
  kCollarL = 13,
  kCollarR = 14,
  kHead = 15,
  kShoulderL = 16,
  kShoulderR = 17,
  kElbowL = 18,
  kElbowR = 19,
  kWristL = 20,
  kWristR = 21,
};

Skeleton default_skeleton();
BodyShape default_shape();

/// Joints at or below the hips; everything else counts as upper body.
const std::vector<int>& lower_body_joints();
std::vector<int> upper_body_joints(int J);

/// One capsule per non-root joint: segment parent(j) -> j with radius[j].
struct Capsule {
  int ja = 0;  // parent joint
  int jb = 0;  // child joint
  float radius = 0;
};
std::vector<Capsule> body_capsules(const Skeleton& s, const BodyShape& shape);

/// Text config round trip (key=value lines).
std::string skeleton_to_text(const Skeleton& s, const BodyShape& shape);
void skeleton_from_text(const std::string& text, Skeleton& s, BodyShape& shape);

}  // namespace xrmbt::body
