// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <utility>
#include <vector>

#include "xrmbt/fk.hpp"
#include "xrmbt/skeleton.hpp"

namespace xrmbt::sensor {

using body::BodyShape;
using body::FkResult;
using body::Mat3f;
using body::Pose;
using body::Skeleton;
using body::Vec3f;

/// Head-mounted depth sensor. `view_dir` is the boresight in the head frame
/// (normalized at use); the default looks forward and down at the body.
struct SensorRig {
  Vec3f mount_offset{0.0f, 0.05f, 0.08f};
  float fov_half_angle = 1.1f;  // radians, in (0, pi/2]
  float max_range = 3.0f;       // meters
  Vec3f view_dir{0.0f, -0.6f, 0.8f};

  void validate() const;
};

inline constexpr float kOcclusionTol = 0.005f;   // meters
inline constexpr float kLabelThreshold = 0.10f;  // meters, point-to-joint
inline constexpr float kNoiseSigma = 0.02f;
inline constexpr float kOutlierSigma = 0.20f;
inline constexpr float kOutlierFrac = 0.02f;

/// Point cloud in the sensor-normalized frame (translated so the sensor
/// origin is at zero; world orientation kept). Labels in [0, J] with J the
/// background class; empty when stripped.
struct SampledCloud {
  std::vector<Vec3f> points;
  std::vector<int> label;
};

struct PosedCapsule {
  Vec3f a, b;
  float r = 0;
};

std::vector<PosedCapsule> pose_capsules(const Skeleton& s, const BodyShape& shape,
                                        const FkResult& f);

/// World-frame sensor origin and boresight for a head transform.
void sensor_frame(const SensorRig& rig, const Vec3f& head_pos, const Mat3f& head_rot,
                  Vec3f& origin_out, Vec3f& view_dir_out);

/// Uniform samples on the capsules' lateral surfaces, bones drawn
/// proportionally to lateral area (2*pi*r*len).
std::vector<Vec3f> surface_sample(const Skeleton& s, const Pose& pose, const BodyShape& shape,
                                  int count, std::mt19937& rng);

/// Closest-joint assignment: (argmin index, distance); ties keep the lowest
/// index.
std::pair<int, float> closest_joint(const Vec3f& p, const std::vector<Vec3f>& joints);

/// In-cone, in-range, unoccluded subset (world frame in, world frame out). A
/// point is occluded when any capsule is hit strictly closer than the point
/// (minus kOcclusionTol).
std::vector<Vec3f> visible_points(const std::vector<Vec3f>& raw, const Vec3f& origin,
                                  const Vec3f& view_dir, const SensorRig& rig,
                                  const std::vector<PosedCapsule>& caps);

/// Draws P points with replacement, probability proportional to distance
/// from the sensor; output is sensor-normalized. Empty input yields P copies
/// of the far sentinel view_dir*max_range. `chosen` (if given) receives the
/// source index per draw, -1 for sentinels.
std::vector<Vec3f> depth_weighted_sample(const std::vector<Vec3f>& pts_world,
                                         const Vec3f& origin, const Vec3f& view_dir,
                                         const SensorRig& rig, int P, std::mt19937& rng,
                                         std::vector<int>* chosen = nullptr);

std::vector<int> label_points(const std::vector<Vec3f>& pts_world,
                              const std::vector<Vec3f>& joints_world);

/// Isotropic sigma=0.02 noise on every point plus sigma=0.20 on an
/// independent 2% subset. `outlier_mask` (if given) records the subset.
void corrupt(std::vector<Vec3f>& pts, std::mt19937& rng,
             std::vector<char>* outlier_mask = nullptr);

/// Held-out pseudo-real corruption profile: extra along-boresight noise
/// (total axial std 1.5x base), dropout of the 5% lowest points (resampled
/// from survivors to keep P), and a +1 cm radial bias. Labels are updated
/// consistently but NOT stripped here; the dataset pipeline strips them.
void domain_shift(SampledCloud& cloud, const Vec3f& view_dir, std::mt19937& rng);

}  // namespace xrmbt::sensor
