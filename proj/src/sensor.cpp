// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "xrmbt/rng.hpp"

namespace xrmbt::sensor {

void SensorRig::validate() const {
  if (!(fov_half_angle > 0.0f && fov_half_angle <= 1.5707964f))
    throw std::invalid_argument("sensor rig: fov_half_angle out of (0, pi/2]");
  if (!(max_range > 0.0f)) throw std::invalid_argument("sensor rig: max_range must be > 0");
  if (view_dir.norm() <= 0.0f) throw std::invalid_argument("sensor rig: zero view direction");
}

std::vector<PosedCapsule> pose_capsules(const Skeleton& s, const BodyShape& shape,
                                        const FkResult& f) {
  std::vector<PosedCapsule> caps;
  caps.reserve(s.J - 1);
  for (int j = 1; j < s.J; ++j)
    caps.push_back({f.pos[s.parent[j]], f.pos[j], shape.radius[j]});
  return caps;
}

void sensor_frame(const SensorRig& rig, const Vec3f& head_pos, const Mat3f& head_rot,
                  Vec3f& origin_out, Vec3f& view_dir_out) {
  origin_out = head_pos + head_rot * rig.mount_offset;
  view_dir_out = (head_rot * rig.view_dir).normalized();
}

std::vector<Vec3f> surface_sample(const Skeleton& s, const Pose& pose, const BodyShape& shape,
                                  int count, std::mt19937& rng) {
  if (count < 1) throw std::invalid_argument("surface_sample: count must be >= 1");
  const FkResult f = body::fk(s, pose, shape.scale);
  const std::vector<PosedCapsule> caps = pose_capsules(s, shape, f);
  std::vector<double> area(caps.size());
  for (size_t c = 0; c < caps.size(); ++c)
    area[c] = 2.0 * 3.14159265358979323846 * caps[c].r * (caps[c].b - caps[c].a).norm();

  std::vector<Vec3f> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int c = rngu::discrete(rng, area);
    const PosedCapsule& cap = caps[c];
    const Vec3f axis = (cap.b - cap.a).normalized();
    // stable perpendicular frame
    const Vec3f ref = std::abs(axis.x) < 0.9f ? Vec3f{1, 0, 0} : Vec3f{0, 1, 0};
    const Vec3f n1 = axis.cross(ref).normalized();
    const Vec3f n2 = axis.cross(n1);
    const float t = static_cast<float>(rngu::canonical(rng));
    const float phi = static_cast<float>(rngu::uniform(rng, 0.0, 2.0 * 3.14159265358979323846));
    out.push_back(cap.a + (cap.b - cap.a) * t +
                  (n1 * std::cos(phi) + n2 * std::sin(phi)) * cap.r);
  }
  return out;
}

std::pair<int, float> closest_joint(const Vec3f& p, const std::vector<Vec3f>& joints) {
  if (joints.empty()) throw std::invalid_argument("closest_joint: no joints");
  int best = 0;
  float bd = (p - joints[0]).sqnorm();
  for (size_t j = 1; j < joints.size(); ++j) {
    const float d = (p - joints[j]).sqnorm();
    if (d < bd) {  // strict: ties keep the lowest index
      bd = d;
      best = static_cast<int>(j);
    }
  }
  return {best, std::sqrt(bd)};
}

std::vector<Vec3f> visible_points(const std::vector<Vec3f>& raw, const Vec3f& origin,
                                  const Vec3f& view_dir, const SensorRig& rig,
                                  const std::vector<PosedCapsule>& caps) {
  const float cos_fov = std::cos(rig.fov_half_angle);
  std::vector<Vec3f> out;
  for (const Vec3f& p : raw) {
    const Vec3f v = p - origin;
    const float depth = v.norm();
    if (depth <= 0.0f || depth > rig.max_range) continue;
    if (v.dot(view_dir) < cos_fov * depth) continue;
    const Vec3f dir = v * (1.0f / depth);
    bool occluded = false;
    for (const PosedCapsule& c : caps) {
      const float t = geom::ray_capsule_hit(origin, dir, c.a, c.b, c.r);
      if (t >= 0.0f && t < depth - kOcclusionTol) {
        occluded = true;
        break;
      }
    }
    if (!occluded) out.push_back(p);
  }
  return out;
}

std::vector<Vec3f> depth_weighted_sample(const std::vector<Vec3f>& pts_world,
                                         const Vec3f& origin, const Vec3f& view_dir,
                                         const SensorRig& rig, int P, std::mt19937& rng,
                                         std::vector<int>* chosen) {
  if (P < 1) throw std::invalid_argument("depth_weighted_sample: P must be >= 1");
  std::vector<Vec3f> out;
  out.reserve(P);
  if (chosen) chosen->assign(P, -1);
  if (pts_world.empty()) {
    out.assign(P, view_dir * rig.max_range);  // sensor frame sentinel
    return out;
  }
  std::vector<double> depth(pts_world.size());
  for (size_t i = 0; i < pts_world.size(); ++i)
    depth[i] = static_cast<double>((pts_world[i] - origin).norm());
  for (int k = 0; k < P; ++k) {
    const int i = rngu::discrete(rng, depth);
    out.push_back(pts_world[i] - origin);
    if (chosen) (*chosen)[k] = i;
  }
  return out;
}

std::vector<int> label_points(const std::vector<Vec3f>& pts_world,
                              const std::vector<Vec3f>& joints_world) {
  const int background = static_cast<int>(joints_world.size());
  std::vector<int> labels(pts_world.size());
  for (size_t i = 0; i < pts_world.size(); ++i) {
    const auto [j, d] = closest_joint(pts_world[i], joints_world);
    labels[i] = d <= kLabelThreshold ? j : background;
  }
  return labels;
}

void corrupt(std::vector<Vec3f>& pts, std::mt19937& rng, std::vector<char>* outlier_mask) {
  if (outlier_mask) outlier_mask->assign(pts.size(), 0);
  for (size_t i = 0; i < pts.size(); ++i) {
    pts[i] += Vec3f(static_cast<float>(kNoiseSigma * rngu::normal(rng)),
                    static_cast<float>(kNoiseSigma * rngu::normal(rng)),
                    static_cast<float>(kNoiseSigma * rngu::normal(rng)));
    if (rngu::bernoulli(rng, kOutlierFrac)) {
      pts[i] += Vec3f(static_cast<float>(kOutlierSigma * rngu::normal(rng)),
                      static_cast<float>(kOutlierSigma * rngu::normal(rng)),
                      static_cast<float>(kOutlierSigma * rngu::normal(rng)));
      if (outlier_mask) (*outlier_mask)[i] = 1;
    }
  }
}

void domain_shift(SampledCloud& cloud, const Vec3f& view_dir, std::mt19937& rng) {
  const size_t n = cloud.points.size();
  if (n == 0) return;
  // axial noise so that total along-boresight std is 1.5x the base sigma
  const float extra = kNoiseSigma * std::sqrt(1.5f * 1.5f - 1.0f);
  const Vec3f axis = view_dir.normalized();
  for (Vec3f& p : cloud.points) p += axis * static_cast<float>(extra * rngu::normal(rng));

  // drop the 5% lowest points (by height), resample replacements from
  // survivors so the count stays fixed
  const size_t drop = n / 20;
  if (drop > 0 && drop < n) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return cloud.points[a].y < cloud.points[b].y; });
    const std::vector<int> survivors(order.begin() + drop, order.end());
    for (size_t k = 0; k < drop; ++k) {
      const int victim = order[k];
      const int src = survivors[rngu::uniform_int(rng, 0, static_cast<int>(survivors.size()) - 1)];
      cloud.points[victim] = cloud.points[src];
      if (!cloud.label.empty()) cloud.label[victim] = cloud.label[src];
    }
  }

  // +1 cm radial bias away from the sensor
  for (Vec3f& p : cloud.points) {
    const float d = p.norm();
    if (d > 1e-6f) p += p * (0.01f / d);
  }
}

}  // namespace xrmbt::sensor
