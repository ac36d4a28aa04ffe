// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "xrmbt/skeleton.hpp"

namespace xrmbt::body {

struct TrackedPoint {
  Vec3f pos;        // world, meters
  Vec3f lin_acc;    // m/s^2, central finite differences
  Rot6f rot;        // world orientation
  std::array<float, 6> rot_acc{};  // second difference of the 6D encoding
};

/// Head + both wrists; flattens to the 54-real tracked-input vector in the
/// order (pos, lin_acc, rot, rot_acc) per point, head first, then left and
/// right wrist.
struct ThreePointFrame {
  TrackedPoint head, wrist_l, wrist_r;

  std::array<float, 54> flat() const;
  static ThreePointFrame from_flat(const float* v);
};

enum class Protocol { kIdle, kWalk, kKick, kKneeStrike, kLiftLeg };

Protocol protocol_from_string(const std::string& s);  // throws on unknown name
const char* protocol_name(Protocol p);

struct MotionSequence {
  Protocol protocol = Protocol::kIdle;
  float fps = 30.0f;
  std::vector<Pose> gt;
  std::vector<ThreePointFrame> x;
};

/// Procedural C1 motion with randomized amplitudes/phases. The spine chain
/// keeps identity local rotations, so the tracked head transform determines
/// the root exactly. Tracked accelerations are central finite differences at
/// `fps` (endpoints copy their neighbor).
MotionSequence gen_motion(Protocol p, int n_frames, float fps, const Skeleton& s, float scale,
                          std::mt19937& rng);

/// Tracked-point extraction used by gen_motion, exposed for tests: builds
/// ThreePointFrames from an arbitrary pose sequence.
std::vector<ThreePointFrame> track_three_points(const Skeleton& s, const std::vector<Pose>& gt,
                                                float fps, float scale);

}  // namespace xrmbt::body
