// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "xrmbt/fk.hpp"
#include "xrmbt/motion.hpp"
#include "xrmbt/rng.hpp"
#include "xrmbt/synthesis.hpp"

using namespace xrmbt;
using body::Protocol;

namespace {

constexpr Protocol kAll[] = {Protocol::kIdle, Protocol::kWalk, Protocol::kKick,
                             Protocol::kKneeStrike, Protocol::kLiftLeg};

// signed sin of the x-rotation component, assuming a (near) pure rot_x local
float hip_sin(const body::Rot6f& r) { return geom::rot6d_to_matrix(r).m[7]; }

double pearson(const std::vector<float>& a, const std::vector<float>& b) {
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double local_angle(const body::Rot6f& a, const body::Rot6f& b) {
  return geom::rotation_angle_between(geom::rot6d_to_matrix(a), geom::rot6d_to_matrix(b));
}

}  // namespace

TEST_CASE("generated motion preserves bone lengths for every protocol") {
  const body::Skeleton s = body::default_skeleton();
  const float scale = 1.05f;
  std::mt19937 rng(21);
  for (Protocol p : kAll) {
    const body::MotionSequence seq = body::gen_motion(p, 40, 30.0f, s, scale, rng);
    REQUIRE(seq.gt.size() == 40);
    for (const body::Pose& pose : seq.gt) {
      const body::FkResult f = body::fk(s, pose, scale);
      for (int j = 1; j < s.J; ++j) {
        const float len = (f.pos[j] - f.pos[s.parent[j]]).norm();
        CHECK(std::abs(len - scale * s.bone_offset[j].norm()) <= 1e-5f);
      }
    }
  }
}

TEST_CASE("tracked head equals the forward-kinematics head exactly") {
  const body::Skeleton s = body::default_skeleton();
  std::mt19937 rng(22);
  const body::MotionSequence seq = body::gen_motion(Protocol::kWalk, 30, 30.0f, s, 1.0f, rng);
  for (size_t t = 0; t < seq.gt.size(); ++t) {
    const body::FkResult f = body::fk(s, seq.gt[t]);
    CHECK((seq.x[t].head.pos - f.pos[body::kHead]).norm() == 0.0f);
    CHECK(seq.x[t].head.rot == geom::matrix_to_rot6d(f.world_rot[body::kHead]));
    CHECK((seq.x[t].wrist_l.pos - f.pos[body::kWristL]).norm() == 0.0f);
    CHECK((seq.x[t].wrist_r.pos - f.pos[body::kWristR]).norm() == 0.0f);
  }
}

TEST_CASE("head root derivation inverts every generated protocol") {
  const body::Skeleton s = body::default_skeleton();
  std::mt19937 rng(23);
  for (Protocol p : kAll) {
    const body::MotionSequence seq = body::gen_motion(p, 20, 30.0f, s, 1.0f, rng);
    for (size_t t = 0; t < seq.gt.size(); ++t) {
      body::Vec3f rp;
      body::Rot6f rr;
      body::derive_root_from_head(s, seq.x[t].head.pos,
                                  geom::rot6d_to_matrix(seq.x[t].head.rot), 1.0f, rp, rr);
      CHECK((rp - seq.gt[t].root_pos).norm() <= 1e-5f);
      CHECK(local_angle(rr, seq.gt[t].root_rot) <= 1e-4);
    }
  }
}

TEST_CASE("walking hips swing in antiphase") {
  const body::Skeleton s = body::default_skeleton();
  std::mt19937 rng(24);
  const body::MotionSequence seq = body::gen_motion(Protocol::kWalk, 90, 30.0f, s, 1.0f, rng);
  std::vector<float> l, r;
  for (const body::Pose& pose : seq.gt) {
    l.push_back(hip_sin(pose.local_rot[body::kHipL]));
    r.push_back(hip_sin(pose.local_rot[body::kHipR]));
  }
  CHECK(pearson(l, r) < -0.95);
}

TEST_CASE("kicks load one leg at a time and alternate") {
  const body::Skeleton s = body::default_skeleton();
  std::mt19937 rng(25);
  const body::MotionSequence seq = body::gen_motion(Protocol::kKick, 150, 30.0f, s, 1.0f, rng);
  float max_l = 0, max_r = 0;
  for (const body::Pose& pose : seq.gt) {
    const float al = std::abs(std::asin(hip_sin(pose.local_rot[body::kHipL])));
    const float ar = std::abs(std::asin(hip_sin(pose.local_rot[body::kHipR])));
    max_l = std::max(max_l, al);
    max_r = std::max(max_r, ar);
    // the trailing hip only counterbalances at 12% of the active swing
    if (std::max(al, ar) > 0.1f) CHECK(std::min(al, ar) <= 0.13f * std::max(al, ar) + 1e-4f);
  }
  CHECK(max_l > 0.5f);  // 150 frames span both alternation parities
  CHECK(max_r > 0.5f);
}

TEST_CASE("tracked accelerations are exact second differences") {
  const body::Skeleton s = body::default_skeleton();
  const float fps = 30.0f, c = 0.1f;
  std::vector<body::Pose> gt;
  for (int t = 0; t < 16; ++t) {
    body::Pose p = body::Pose::rest(s.J);
    const float ts = t / fps;
    p.root_pos = {0, 0.9f + c * ts * ts, 0};
    gt.push_back(p);
  }
  const auto x = body::track_three_points(s, gt, fps, 1.0f);
  for (int t = 0; t < 16; ++t) {
    CHECK(std::abs(x[t].head.lin_acc.y - 2.0f * c) <= 1e-3f);
    CHECK(x[t].head.lin_acc.x == 0.0f);  // constant coordinates cancel exactly
    CHECK(x[t].head.lin_acc.z == 0.0f);
    for (float ra : x[t].head.rot_acc) CHECK(ra == 0.0f);  // constant orientation
  }
  // endpoints copy their neighbor
  CHECK(x[0].head.lin_acc.y == x[1].head.lin_acc.y);
  CHECK(x[15].head.lin_acc.y == x[14].head.lin_acc.y);
}

TEST_CASE("protocol names round trip and reject unknowns") {
  for (Protocol p : kAll) CHECK(body::protocol_from_string(body::protocol_name(p)) == p);
  CHECK_THROWS_AS(body::protocol_from_string("sprint"), std::invalid_argument);
}

TEST_CASE("noisy oracle keeps the head-derived root and gt lower body") {
  const body::Skeleton s = body::default_skeleton();
  std::mt19937 rng(26);
  const body::MotionSequence seq = body::gen_motion(Protocol::kWalk, 60, 30.0f, s, 1.0f, rng);

  synth::OracleConfig cfg;
  cfg.lower_mode = synth::LowerMode::kGt;
  std::mt19937 orng(27);
  const auto out = synth::noisy_oracle(seq.x, seq.gt, s, cfg, orng);
  REQUIRE(out.size() == seq.gt.size());

  const auto& lower = body::lower_body_joints();
  double angle_sum = 0;
  int upper_count = 0;
  for (size_t t = 0; t < out.size(); ++t) {
    CHECK((out[t].root_pos - seq.gt[t].root_pos).norm() <= 1e-5f);
    CHECK(local_angle(out[t].root_rot, seq.gt[t].root_rot) <= 1e-4);
    for (int j = 0; j < s.J; ++j) {
      const bool is_lower = std::find(lower.begin(), lower.end(), j) != lower.end();
      if (is_lower) {
        CHECK(out[t].local_rot[j] == seq.gt[t].local_rot[j]);  // untouched
      } else {
        angle_sum += local_angle(out[t].local_rot[j], seq.gt[t].local_rot[j]);
        ++upper_count;
      }
    }
  }
  // half-normal mean of the 3 degree jitter: sigma*sqrt(2/pi) ~ 0.042 rad
  const double mean_angle = angle_sum / upper_count;
  CHECK(mean_angle > 0.02);
  CHECK(mean_angle < 0.08);

  // sigma 0 + gt lower body reproduces gt locals bitwise
  synth::OracleConfig clean = cfg;
  clean.upper_sigma = 0.0f;
  std::mt19937 crng(28);
  const auto exact = synth::noisy_oracle(seq.x, seq.gt, s, clean, crng);
  for (size_t t = 0; t < exact.size(); ++t)
    for (int j = 0; j < s.J; ++j) CHECK(exact[t].local_rot[j] == seq.gt[t].local_rot[j]);
}

TEST_CASE("oracle lower-body replacements match their definitions") {
  const body::Skeleton s = body::default_skeleton();
  std::mt19937 rng(29);
  const body::MotionSequence seq = body::gen_motion(Protocol::kKick, 50, 30.0f, s, 1.0f, rng);

  SUBCASE("lagged mode delays the gt legs by lag_seconds") {
    synth::OracleConfig cfg;
    cfg.lower_mode = synth::LowerMode::kLagged;  // 0.5 s at 30 fps = 15 frames
    std::mt19937 orng(30);
    const auto out = synth::noisy_oracle(seq.x, seq.gt, s, cfg, orng);
    for (int t = 0; t < 50; ++t) {
      const int src = std::max(0, t - 15);
      for (int l : body::lower_body_joints())
        CHECK(out[t].local_rot[l] == seq.gt[src].local_rot[l]);
    }
  }

  SUBCASE("idle mode swaps in the canonical sway") {
    synth::OracleConfig cfg;  // default lower_mode is idle
    std::mt19937 orng(31);
    const auto out = synth::noisy_oracle(seq.x, seq.gt, s, cfg, orng);
    for (int t = 0; t < 50; ++t) {
      const double a = 0.03 * std::sin(2.0 * 3.14159265358979323846 *
                                       (t / static_cast<double>(cfg.fps)) / 2.0);
      const auto hip_l =
          geom::matrix_to_rot6d(body::Mat3f::rot_x(static_cast<float>(-a)));
      const auto hip_r = geom::matrix_to_rot6d(body::Mat3f::rot_x(static_cast<float>(a)));
      CHECK(out[t].local_rot[body::kHipL] == hip_l);
      CHECK(out[t].local_rot[body::kHipR] == hip_r);
      CHECK(out[t].local_rot[body::kAnkleL] == body::Rot6f::identity());
      CHECK(out[t].local_rot[body::kFootR] == body::Rot6f::identity());
    }
  }

  SUBCASE("mode names round trip") {
    for (auto m : {synth::LowerMode::kGt, synth::LowerMode::kIdle, synth::LowerMode::kLagged})
      CHECK(synth::lower_mode_from_string(synth::lower_mode_name(m)) == m);
    CHECK_THROWS_AS(synth::lower_mode_from_string("frozen"), std::invalid_argument);
  }
}

TEST_CASE("mlp baseline is deterministic and trainable") {
  const body::Skeleton s = body::default_skeleton();
  synth::MlpConfig mc;
  mc.hidden = 32;

  nn::ParamStore<float> ps1, ps2;
  std::mt19937 r1(32), r2(32);
  synth::mlp_init(ps1, mc, r1);
  synth::mlp_init(ps2, mc, r2);
  REQUIRE(ps1.entries.size() == 6);
  CHECK(ps1.at("synth.l1.w").shape == std::vector<int>{54, 32});
  CHECK(ps1.at("synth.out.w").shape == std::vector<int>{32, s.J * 6});
  for (size_t i = 0; i < ps1.entries.size(); ++i)
    CHECK(ps1.entries[i].value.data == ps2.entries[i].value.data);

  std::mt19937 mrng(33);
  const body::MotionSequence seq = body::gen_motion(Protocol::kWalk, 48, 30.0f, s, 1.0f, mrng);
  const auto out1 = synth::mlp_synthesize(seq.x, s, ps1, mc);
  const auto out2 = synth::mlp_synthesize(seq.x, s, ps1, mc);
  REQUIRE(out1.size() == 48);
  for (size_t t = 0; t < out1.size(); ++t)
    for (int j = 0; j < s.J; ++j) CHECK(out1[t].local_rot[j] == out2[t].local_rot[j]);

  synth::MlpTrainConfig tc;
  tc.batch_frames = 64;
  tc.seed = 5;
  tc.iterations = 5;
  nn::ParamStore<float> early = ps1;
  const double l_early = synth::mlp_train(early, mc, tc, s, {seq.x}, {seq.gt});
  tc.iterations = 150;
  nn::ParamStore<float> late = ps1;
  const double l_late = synth::mlp_train(late, mc, tc, s, {seq.x}, {seq.gt});
  CHECK(l_late < 0.9 * l_early);
  CHECK_THROWS_AS(synth::mlp_train(late, mc, tc, s, {}, {}), std::invalid_argument);
}
