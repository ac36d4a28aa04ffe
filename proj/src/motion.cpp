// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/motion.hpp"

#include <cmath>
#include <stdexcept>

#include "xrmbt/fk.hpp"
#include "xrmbt/rng.hpp"

namespace xrmbt::body {

namespace {
constexpr double kPi = 3.14159265358979323846;

// C1 bump: sin^2(pi*u) on [0,1], 0 outside.
double bump(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double s = std::sin(kPi * u);
  return s * s;
}

Rot6f rotx6(float a) { return geom::matrix_to_rot6d(Mat3f::rot_x(a)); }

struct ArmPose {
  float base_l, base_r;  // shoulder drop about Z, radians
  float elbow;
};

void set_arms(Pose& p, const ArmPose& arm, float swing_l, float swing_r) {
  p.local_rot[kShoulderL] =
      geom::matrix_to_rot6d(Mat3f::rot_x(swing_l) * Mat3f::rot_z(-arm.base_l));
  p.local_rot[kShoulderR] =
      geom::matrix_to_rot6d(Mat3f::rot_x(swing_r) * Mat3f::rot_z(arm.base_r));
  p.local_rot[kElbowL] = geom::matrix_to_rot6d(Mat3f::rot_z(-arm.elbow));
  p.local_rot[kElbowR] = geom::matrix_to_rot6d(Mat3f::rot_z(arm.elbow));
}

// Positive angle swings the leg forward (+Z).
void set_leg(Pose& p, bool left, float hip_fwd, float knee_flex, float ankle) {
  p.local_rot[left ? kHipL : kHipR] = rotx6(-hip_fwd);
  p.local_rot[left ? kKneeL : kKneeR] = rotx6(knee_flex);
  p.local_rot[left ? kAnkleL : kAnkleR] = rotx6(ankle);
}
}  // namespace

std::array<float, 54> ThreePointFrame::flat() const {
  std::array<float, 54> v;
  int k = 0;
  for (const TrackedPoint* tp : {&head, &wrist_l, &wrist_r}) {
    v[k++] = tp->pos.x;
    v[k++] = tp->pos.y;
    v[k++] = tp->pos.z;
    v[k++] = tp->lin_acc.x;
    v[k++] = tp->lin_acc.y;
    v[k++] = tp->lin_acc.z;
    for (int i = 0; i < 6; ++i) v[k++] = tp->rot.v[i];
    for (int i = 0; i < 6; ++i) v[k++] = tp->rot_acc[i];
  }
  return v;
}

ThreePointFrame ThreePointFrame::from_flat(const float* v) {
  ThreePointFrame f;
  int k = 0;
  for (TrackedPoint* tp : {&f.head, &f.wrist_l, &f.wrist_r}) {
    tp->pos = {v[k], v[k + 1], v[k + 2]};
    tp->lin_acc = {v[k + 3], v[k + 4], v[k + 5]};
    for (int i = 0; i < 6; ++i) tp->rot.v[i] = v[k + 6 + i];
    for (int i = 0; i < 6; ++i) tp->rot_acc[i] = v[k + 12 + i];
    k += 18;
  }
  return f;
}

Protocol protocol_from_string(const std::string& s) {
  if (s == "idle") return Protocol::kIdle;
  if (s == "walk") return Protocol::kWalk;
  if (s == "kick") return Protocol::kKick;
  if (s == "knee_strike") return Protocol::kKneeStrike;
  if (s == "lift_leg") return Protocol::kLiftLeg;
  throw std::invalid_argument("unknown motion protocol '" + s + "'");
}

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kIdle: return "idle";
    case Protocol::kWalk: return "walk";
    case Protocol::kKick: return "kick";
    case Protocol::kKneeStrike: return "knee_strike";
    case Protocol::kLiftLeg: return "lift_leg";
  }
  return "?";
}

std::vector<ThreePointFrame> track_three_points(const Skeleton& s, const std::vector<Pose>& gt,
                                                float fps, float scale) {
  const int n = static_cast<int>(gt.size());
  std::vector<Vec3f> pos[3];
  std::vector<Rot6f> rot[3];
  const int joints[3] = {kHead, kWristL, kWristR};
  for (int a = 0; a < 3; ++a) {
    pos[a].resize(n);
    rot[a].resize(n);
  }
  for (int t = 0; t < n; ++t) {
    const FkResult f = fk(s, gt[t], scale);
    for (int a = 0; a < 3; ++a) {
      pos[a][t] = f.pos[joints[a]];
      rot[a][t] = geom::matrix_to_rot6d(f.world_rot[joints[a]]);
    }
  }
  const float f2 = fps * fps;
  std::vector<ThreePointFrame> out(n);
  for (int t = 0; t < n; ++t) {
    const int tc = std::min(std::max(t, 1), n - 2);  // endpoints copy neighbor
    TrackedPoint* tps[3] = {&out[t].head, &out[t].wrist_l, &out[t].wrist_r};
    for (int a = 0; a < 3; ++a) {
      tps[a]->pos = pos[a][t];
      tps[a]->rot = rot[a][t];
      if (n >= 3) {
        tps[a]->lin_acc = (pos[a][tc + 1] - pos[a][tc] * 2.0f + pos[a][tc - 1]) * f2;
        for (int i = 0; i < 6; ++i)
          tps[a]->rot_acc[i] =
              (rot[a][tc + 1].v[i] - 2.0f * rot[a][tc].v[i] + rot[a][tc - 1].v[i]) * f2;
      }
    }
  }
  return out;
}

MotionSequence gen_motion(Protocol p, int n_frames, float fps, const Skeleton& s, float scale,
                          std::mt19937& rng) {
  if (n_frames < 1) throw std::invalid_argument("gen_motion: need at least one frame");
  MotionSequence seq;
  seq.protocol = p;
  seq.fps = fps;
  seq.gt.reserve(n_frames);

  const double hip_h = rngu::uniform(rng, 0.88, 0.95) * scale;
  const double yaw0 = rngu::uniform(rng, -kPi, kPi);
  ArmPose arm{static_cast<float>(rngu::uniform(rng, 1.15, 1.45)),
              static_cast<float>(rngu::uniform(rng, 1.15, 1.45)),
              static_cast<float>(rngu::uniform(rng, 0.15, 0.45))};

  // protocol parameters
  double period = 1.0, amp_hip = 0.0, amp_knee = 0.0, amp_arm = 0.0;
  double speed = 0.0, yaw_rate = 0.0, bob = 0.0, phase0 = rngu::uniform(rng, 0.0, 2.0 * kPi);
  double idle_hip = 0.0, idle_knee = 0.0;
  switch (p) {
    case Protocol::kIdle:
      idle_hip = rngu::uniform(rng, -0.05, 0.05);
      idle_knee = rngu::uniform(rng, 0.0, 0.08);
      break;
    case Protocol::kWalk:
      period = rngu::uniform(rng, 1.0, 1.4);
      amp_hip = rngu::uniform(rng, 0.45, 0.65);
      amp_knee = rngu::uniform(rng, 0.55, 0.85);
      amp_arm = rngu::uniform(rng, 0.25, 0.45);
      speed = rngu::uniform(rng, 0.8, 1.2);
      yaw_rate = rngu::uniform(rng, -0.25, 0.25);
      bob = rngu::uniform(rng, 0.015, 0.03);
      break;
    case Protocol::kKick:
      period = rngu::uniform(rng, 1.2, 1.6);
      amp_hip = rngu::uniform(rng, 0.9, 1.3);
      amp_knee = rngu::uniform(rng, 0.8, 1.2);
      amp_arm = rngu::uniform(rng, 0.1, 0.25);
      break;
    case Protocol::kKneeStrike:
      period = rngu::uniform(rng, 1.0, 1.4);
      amp_hip = rngu::uniform(rng, 0.8, 1.1);
      amp_knee = rngu::uniform(rng, 1.3, 1.8);
      amp_arm = rngu::uniform(rng, 0.1, 0.25);
      break;
    case Protocol::kLiftLeg:
      period = rngu::uniform(rng, 2.0, 3.0);
      amp_hip = rngu::uniform(rng, 0.7, 1.0);
      amp_knee = rngu::uniform(rng, 0.2, 0.4);
      amp_arm = rngu::uniform(rng, 0.05, 0.15);
      break;
  }

  for (int t = 0; t < n_frames; ++t) {
    const double tt = t / static_cast<double>(fps);
    Pose pose = Pose::rest(s.J);

    // root: translate/turn for walking, static stance otherwise
    double yaw = yaw0;
    Vec3f rp{0, static_cast<float>(hip_h), 0};
    if (p == Protocol::kWalk) {
      yaw = yaw0 + yaw_rate * tt;
      // closed-form integral of speed * (sin yaw, 0, cos yaw)
      if (std::abs(yaw_rate) > 1e-6) {
        rp.x = static_cast<float>(speed / yaw_rate * (std::cos(yaw0) - std::cos(yaw)));
        rp.z = static_cast<float>(speed / yaw_rate * (std::sin(yaw) - std::sin(yaw0)));
      } else {
        rp.x = static_cast<float>(speed * tt * std::sin(yaw0));
        rp.z = static_cast<float>(speed * tt * std::cos(yaw0));
      }
      rp.y = static_cast<float>(hip_h + bob * std::sin(4.0 * kPi * tt / period + phase0));
    }
    pose.root_pos = rp;
    pose.root_rot = geom::matrix_to_rot6d(Mat3f::rot_y(static_cast<float>(yaw)));

    const double ph = 2.0 * kPi * tt / period + phase0;
    switch (p) {
      case Protocol::kIdle: {
        set_leg(pose, true, static_cast<float>(idle_hip), static_cast<float>(idle_knee), 0);
        set_leg(pose, false, static_cast<float>(-idle_hip), static_cast<float>(idle_knee), 0);
        set_arms(pose, arm, 0, 0);
        break;
      }
      case Protocol::kWalk: {
        const double swing_l = amp_hip * std::sin(ph);
        const double swing_r = amp_hip * std::sin(ph + kPi);
        // knee flexes while the same-side leg swings back
        const double kl = amp_knee * bump(std::fmod(ph / (2 * kPi) + 0.5, 1.0));
        const double kr = amp_knee * bump(std::fmod(ph / (2 * kPi), 1.0));
        set_leg(pose, true, static_cast<float>(swing_l), static_cast<float>(kl),
                static_cast<float>(-0.2 * swing_l));
        set_leg(pose, false, static_cast<float>(swing_r), static_cast<float>(kr),
                static_cast<float>(-0.2 * swing_r));
        set_arms(pose, arm, static_cast<float>(amp_arm * std::sin(ph + kPi)),
                 static_cast<float>(amp_arm * std::sin(ph)));
        break;
      }
      case Protocol::kKick:
      case Protocol::kKneeStrike:
      case Protocol::kLiftLeg: {
        const double cycles = tt / period + phase0 / (2 * kPi);
        const int cyc = static_cast<int>(std::floor(cycles));
        const double u = cycles - cyc;
        const bool left = (cyc % 2 + 2) % 2 == 0;  // alternate active leg per cycle
        double hip_a = 0, knee_a = 0;
        if (p == Protocol::kKick) {
          // forward swing over the first 60% of the cycle, knee chambers then extends
          hip_a = amp_hip * bump(u / 0.6);
          knee_a = amp_knee * bump(std::fmod(u / 0.3, 1.0)) * (u < 0.6 ? 1.0 : 0.0);
        } else if (p == Protocol::kKneeStrike) {
          hip_a = amp_hip * bump(u / 0.7);
          knee_a = amp_knee * bump(u / 0.7);
        } else {
          hip_a = amp_hip * bump(u);
          knee_a = amp_knee * bump(u);
        }
        set_leg(pose, left, static_cast<float>(hip_a), static_cast<float>(knee_a), 0);
        set_leg(pose, !left, static_cast<float>(-0.12 * hip_a), 0, 0);
        const double a = amp_arm * bump(u);
        set_arms(pose, arm, static_cast<float>(left ? -a : a),
                 static_cast<float>(left ? a : -a));
        break;
      }
    }
    seq.gt.push_back(std::move(pose));
  }
  seq.x = track_three_points(s, seq.gt, fps, scale);
  return seq;
}

}  // namespace xrmbt::body
