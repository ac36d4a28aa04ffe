// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/skeleton.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace xrmbt::body {

void Skeleton::validate() const {
  if (J <= 0 || static_cast<int>(parent.size()) != J ||
      static_cast<int>(bone_offset.size()) != J || static_cast<int>(name.size()) != J)
    throw std::invalid_argument("skeleton: field lengths do not match J");
  if (parent[0] != 0) throw std::invalid_argument("skeleton: root must be its own parent");
  for (int j = 1; j < J; ++j) {
    if (parent[j] < 0 || parent[j] >= J || parent[j] == j)
      throw std::invalid_argument("skeleton: bad parent for joint " + std::to_string(j));
    // walk to root; J steps suffice in a valid tree
    int k = j, steps = 0;
    while (k != 0 && steps++ <= J) k = parent[k];
    if (k != 0) throw std::invalid_argument("skeleton: joint " + std::to_string(j) +
                                            " not connected to root (cycle?)");
    if (bone_offset[j].norm() <= 0.0f)
      throw std::invalid_argument("skeleton: zero bone length at joint " + std::to_string(j));
  }
}

void BodyShape::validate(int J) const {
  if (static_cast<int>(radius.size()) != J)
    throw std::invalid_argument("shape: need one radius per joint");
  for (int j = 1; j < J; ++j)
    if (radius[j] < 0.02f || radius[j] > 0.20f)
      throw std::invalid_argument("shape: radius out of [0.02,0.20] at joint " +
                                  std::to_string(j));
  if (scale < 0.85f || scale > 1.15f)
    throw std::invalid_argument("shape: scale out of [0.85,1.15]");
}

Skeleton default_skeleton() {
  Skeleton s;
  s.J = 22;
  // {name, parent, offset}
  struct Row {
    const char* name;
    int parent;
    Vec3f off;
  };
  // Y up, Z forward, X left. Pelvis height comes from Pose::root_pos.
  static const Row rows[22] = {
      {"pelvis", 0, {0, 0, 0}},
      {"hip_l", 0, {0.09f, -0.06f, 0}},
      {"hip_r", 0, {-0.09f, -0.06f, 0}},
      {"spine1", 0, {0, 0.11f, 0}},
      {"knee_l", 1, {0, -0.40f, 0}},
      {"knee_r", 2, {0, -0.40f, 0}},
      {"spine2", 3, {0, 0.12f, 0}},
      {"ankle_l", 4, {0, -0.42f, 0}},
      {"ankle_r", 5, {0, -0.42f, 0}},
      {"spine3", 6, {0, 0.12f, 0}},
      {"foot_l", 7, {0, -0.05f, 0.12f}},
      {"foot_r", 8, {0, -0.05f, 0.12f}},
      {"neck", 9, {0, 0.10f, 0}},
      {"collar_l", 9, {0.05f, 0.06f, 0}},
      {"collar_r", 9, {-0.05f, 0.06f, 0}},
      {"head", 12, {0, 0.12f, 0}},
      {"shoulder_l", 13, {0.12f, 0, 0}},
      {"shoulder_r", 14, {-0.12f, 0, 0}},
      {"elbow_l", 16, {0.26f, 0, 0}},
      {"elbow_r", 17, {-0.26f, 0, 0}},
      {"wrist_l", 18, {0.25f, 0, 0}},
      {"wrist_r", 19, {-0.25f, 0, 0}},
  };
  for (const Row& r : rows) {
    s.name.emplace_back(r.name);
    s.parent.push_back(r.parent);
    s.bone_offset.push_back(r.off);
  }
  s.validate();
  return s;
}

BodyShape default_shape() {
  BodyShape b;
  b.radius.assign(22, 0.05f);
  b.radius[kHipL] = b.radius[kHipR] = 0.09f;
  b.radius[kSpine1] = 0.11f;
  b.radius[kKneeL] = b.radius[kKneeR] = 0.07f;  // thighs
  b.radius[kSpine2] = 0.12f;
  b.radius[kAnkleL] = b.radius[kAnkleR] = 0.05f;  // shins
  b.radius[kSpine3] = 0.12f;
  b.radius[kFootL] = b.radius[kFootR] = 0.04f;
  b.radius[kNeck] = 0.06f;
  b.radius[kCollarL] = b.radius[kCollarR] = 0.06f;
  b.radius[kHead] = 0.09f;
  b.radius[kShoulderL] = b.radius[kShoulderR] = 0.06f;
  b.radius[kElbowL] = b.radius[kElbowR] = 0.045f;  // upper arms
  b.radius[kWristL] = b.radius[kWristR] = 0.04f;   // forearms
  b.scale = 1.0f;
  return b;
}

const std::vector<int>& lower_body_joints() {
  static const std::vector<int> v = {kHipL, kHipR, kKneeL, kKneeR, kAnkleL, kAnkleR, kFootL,
                                     kFootR};
  return v;
}

std::vector<int> upper_body_joints(int J) {
  std::vector<int> v;
  for (int j = 0; j < J; ++j) {
    bool lower = false;
    for (int l : lower_body_joints())
      if (l == j) lower = true;
    if (!lower) v.push_back(j);
  }
  return v;
}

std::vector<Capsule> body_capsules(const Skeleton& s, const BodyShape& shape) {
  std::vector<Capsule> caps;
  caps.reserve(s.J - 1);
  for (int j = 1; j < s.J; ++j) caps.push_back({s.parent[j], j, shape.radius[j]});
  return caps;
}

std::string skeleton_to_text(const Skeleton& s, const BodyShape& shape) {
  std::ostringstream out;
  out << "schema=xrmbt-skeleton-v1\n";
  out << "joints=" << s.J << "\n";
  char buf[256];
  for (int j = 0; j < s.J; ++j) {
    std::snprintf(buf, sizeof buf, "joint=%d name=%s parent=%d offset=%.9g,%.9g,%.9g radius=%.9g\n",
                  j, s.name[j].c_str(), s.parent[j], s.bone_offset[j].x, s.bone_offset[j].y,
                  s.bone_offset[j].z, shape.radius[j]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "scale=%.9g\n", shape.scale);
  out << buf;
  return out.str();
}

void skeleton_from_text(const std::string& text, Skeleton& s, BodyShape& shape) {
  std::istringstream in(text);
  std::string line;
  s = Skeleton{};
  shape = BodyShape{};
  bool seen_schema = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("schema=", 0) == 0) {
      if (line != "schema=xrmbt-skeleton-v1")
        throw std::invalid_argument("skeleton config: unknown schema '" + line + "'");
      seen_schema = true;
    } else if (line.rfind("joints=", 0) == 0) {
      s.J = std::stoi(line.substr(7));
      s.parent.assign(s.J, 0);
      s.bone_offset.assign(s.J, Vec3f{});
      s.name.assign(s.J, "");
      shape.radius.assign(s.J, 0.05f);
    } else if (line.rfind("joint=", 0) == 0) {
      int j = -1, parent = -1;
      char name[64] = {0};
      float ox, oy, oz, r;
      if (std::sscanf(line.c_str(), "joint=%d name=%63s parent=%d offset=%f,%f,%f radius=%f",
                      &j, name, &parent, &ox, &oy, &oz, &r) != 7 ||
          j < 0 || j >= s.J)
        throw std::invalid_argument("skeleton config: bad joint line '" + line + "'");
      s.name[j] = name;
      s.parent[j] = parent;
      s.bone_offset[j] = {ox, oy, oz};
      shape.radius[j] = r;
    } else if (line.rfind("scale=", 0) == 0) {
      shape.scale = std::stof(line.substr(6));
    } else {
      throw std::invalid_argument("skeleton config: unknown line '" + line + "'");
    }
  }
  if (!seen_schema) throw std::invalid_argument("skeleton config: missing schema line");
  s.validate();
  shape.validate(s.J);
}

}  // namespace xrmbt::body
