// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "xrmbt/fk.hpp"
#include "xrmbt/rng.hpp"
#include "xrmbt/sensor.hpp"
#include "xrmbt/sequence.hpp"

using namespace xrmbt;
using body::Vec3f;

namespace {

// tiny two-bone chain with orthogonal bones for area-ratio checks
void two_bone_rig(body::Skeleton& s, body::BodyShape& shape) {
  s.J = 3;
  s.parent = {0, 0, 1};
  s.bone_offset = {{0, 0, 0}, {0, 0.4f, 0}, {0.3f, 0, 0}};
  s.name = {"root", "a", "b"};
  shape.radius = {0.05f, 0.04f, 0.08f};
  shape.scale = 1.0f;
}

double coord_std(const std::vector<Vec3f>& pts, const std::vector<char>& mask, char want) {
  double ss = 0.0;
  long n = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (mask[i] != want) continue;
    ss += static_cast<double>(pts[i].x) * pts[i].x + static_cast<double>(pts[i].y) * pts[i].y +
          static_cast<double>(pts[i].z) * pts[i].z;
    n += 3;
  }
  return std::sqrt(ss / static_cast<double>(n));
}

}  // namespace

TEST_CASE("pose_capsules mirrors the skeleton bones") {
  const body::Skeleton s = body::default_skeleton();
  const body::BodyShape shape = body::default_shape();
  const body::FkResult f = body::fk(s, body::Pose::rest(s.J));
  const auto caps = sensor::pose_capsules(s, shape, f);
  REQUIRE(caps.size() == static_cast<size_t>(s.J - 1));
  for (int j = 1; j < s.J; ++j) {
    CHECK((caps[j - 1].a - f.pos[s.parent[j]]).norm() == 0.0f);
    CHECK((caps[j - 1].b - f.pos[j]).norm() == 0.0f);
    CHECK(caps[j - 1].r == shape.radius[j]);
  }
}

TEST_CASE("surface samples lie on a capsule surface") {
  const body::Skeleton s = body::default_skeleton();
  const body::BodyShape shape = body::default_shape();
  const body::Pose rest = body::Pose::rest(s.J);
  const body::FkResult f = body::fk(s, rest);
  const auto caps = sensor::pose_capsules(s, shape, f);
  std::mt19937 rng(11);
  const auto pts = sensor::surface_sample(s, rest, shape, 2000, rng);
  REQUIRE(pts.size() == 2000);
  for (const Vec3f& p : pts) {
    float best = 1e30f;
    for (const auto& c : caps)
      best = std::min(best, std::abs(geom::point_segment_distance(p, c.a, c.b) - c.r));
    CHECK(best <= 1e-5f);
  }
}

TEST_CASE("surface sampling allocates points by lateral area") {
  body::Skeleton s;
  body::BodyShape shape;
  two_bone_rig(s, shape);
  const body::Pose rest = body::Pose::rest(s.J);
  const body::FkResult f = body::fk(s, rest);
  const auto caps = sensor::pose_capsules(s, shape, f);
  std::mt19937 rng(12);
  const int n = 20000;
  const auto pts = sensor::surface_sample(s, rest, shape, n, rng);
  int on_a = 0;
  for (const Vec3f& p : pts) {
    const float da = std::abs(geom::point_segment_distance(p, caps[0].a, caps[0].b) - caps[0].r);
    const float db = std::abs(geom::point_segment_distance(p, caps[1].a, caps[1].b) - caps[1].r);
    if (da < db) ++on_a;
  }
  // areas 2*pi*0.04*0.4 vs 2*pi*0.08*0.3  ->  p(a) = 0.4
  const double frac = static_cast<double>(on_a) / n;
  CHECK(frac > 0.36);
  CHECK(frac < 0.44);
}

TEST_CASE("closest_joint matches brute force and breaks ties low") {
  std::mt19937 rng(13);
  std::vector<Vec3f> joints(9);
  for (auto& j : joints) j = rngu::sphere_dir<Vec3f>(rng) * 1.5f;
  for (int i = 0; i < 200; ++i) {
    const Vec3f p = rngu::sphere_dir<Vec3f>(rng) * static_cast<float>(rngu::uniform(rng, 0, 2));
    int best = 0;
    for (int j = 1; j < 9; ++j)
      if ((p - joints[j]).norm() < (p - joints[best]).norm()) best = j;
    const auto [idx, d] = sensor::closest_joint(p, joints);
    CHECK(idx == best);
    CHECK(d == doctest::Approx((p - joints[best]).norm()).epsilon(1e-6));
  }
  const std::vector<Vec3f> sym = {{1, 0, 0}, {-1, 0, 0}};
  CHECK(sensor::closest_joint(Vec3f{0, 0, 0}, sym).first == 0);  // exact tie
}

TEST_CASE("visible_points culls by cone, range and occlusion") {
  sensor::SensorRig rig;
  rig.view_dir = {0, 0, 1};
  const Vec3f origin{0, 0, 0}, vdir{0, 0, 1};

  SUBCASE("cone and range") {
    const std::vector<Vec3f> raw = {
        {0, 0, 1.0f},                                          // straight ahead
        {std::sin(1.0f), 0, std::cos(1.0f)},                   // inside the 1.1 rad cone
        {std::sin(1.2f), 0, std::cos(1.2f)},                   // outside the cone
        {0, 0, 2.9f},                                          // in range
        {0, 0, 3.05f},                                         // past max_range
        {0, 0, -0.5f},                                         // behind
    };
    const auto vis = sensor::visible_points(raw, origin, vdir, rig, {});
    REQUIRE(vis.size() == 3);
    CHECK((vis[0] - raw[0]).norm() == 0.0f);  // input order preserved
    CHECK((vis[1] - raw[1]).norm() == 0.0f);
    CHECK((vis[2] - raw[3]).norm() == 0.0f);
  }

  SUBCASE("occlusion keeps front surfaces and drops far sides") {
    std::vector<sensor::PosedCapsule> caps(1);
    caps[0] = {{0, -0.5f, 2.0f}, {0, 0.5f, 2.0f}, 0.1f};
    const std::vector<Vec3f> raw = {
        {0, 0, 1.9f},   // exactly on the front surface
        {0, 0, 1.85f},  // just in front
        {0, 0, 2.15f},  // behind the capsule
        {0, 0, 2.8f},   // further behind
        {0.5f, 0, 2.0f} // beside the capsule, unobstructed
    };
    const auto vis = sensor::visible_points(raw, origin, vdir, rig, caps);
    REQUIRE(vis.size() == 3);
    CHECK((vis[0] - raw[0]).norm() == 0.0f);
    CHECK((vis[1] - raw[1]).norm() == 0.0f);
    CHECK((vis[2] - raw[4]).norm() == 0.0f);
  }
}

TEST_CASE("depth_weighted_sample normalizes and weights by depth") {
  sensor::SensorRig rig;
  const Vec3f origin{0.5f, 0, 0}, vdir{0, 0, 1};
  std::mt19937 rng(14);

  SUBCASE("single point repeats exactly") {
    std::vector<int> chosen;
    const auto out =
        sensor::depth_weighted_sample({{1.5f, 2, 3}}, origin, vdir, rig, 7, rng, &chosen);
    REQUIRE(out.size() == 7);
    for (const Vec3f& p : out) CHECK((p - Vec3f{1.0f, 2, 3}).norm() == 0.0f);
    CHECK(std::all_of(chosen.begin(), chosen.end(), [](int c) { return c == 0; }));
  }

  SUBCASE("empty input yields the far sentinel") {
    std::vector<int> chosen;
    const auto out = sensor::depth_weighted_sample({}, origin, vdir, rig, 5, rng, &chosen);
    REQUIRE(out.size() == 5);
    for (const Vec3f& p : out) CHECK((p - vdir * rig.max_range).norm() == 0.0f);
    CHECK(std::all_of(chosen.begin(), chosen.end(), [](int c) { return c == -1; }));
  }

  SUBCASE("two points at depth 1 and 2 draw at ratio 1:2") {
    const std::vector<Vec3f> pts = {{1.5f, 0, 0}, {2.5f, 0, 0}};  // depths 1 and 2
    std::vector<int> chosen;
    const int n = 100000;
    sensor::depth_weighted_sample(pts, origin, vdir, rig, n, rng, &chosen);
    const double f0 =
        static_cast<double>(std::count(chosen.begin(), chosen.end(), 0)) / n;
    CHECK(f0 > 1.0 / 3.0 - 0.01);
    CHECK(f0 < 1.0 / 3.0 + 0.01);
  }
}

TEST_CASE("label_points thresholds against the closest joint") {
  const std::vector<Vec3f> joints = {{0, 0, 0}, {1, 0, 0}};
  const std::vector<Vec3f> pts = {
      {0.099f, 0, 0},  // inside threshold of joint 0
      {1.0f, 0.099f, 0},
      {0.101f, 0, 0},  // outside: background
      {0.5f, 0, 0},
  };
  const auto labels = sensor::label_points(pts, joints);
  CHECK(labels == std::vector<int>{0, 1, 2, 2});
}

TEST_CASE("corrupt matches its documented noise profile") {
  std::vector<Vec3f> pts(100000, Vec3f{0, 0, 0});
  std::vector<char> mask;
  std::mt19937 rng(15);
  sensor::corrupt(pts, rng, &mask);
  REQUIRE(mask.size() == pts.size());

  const long outliers = std::count(mask.begin(), mask.end(), char(1));
  const double frac = static_cast<double>(outliers) / static_cast<double>(pts.size());
  CHECK(frac > 0.015);
  CHECK(frac < 0.025);

  const double base = coord_std(pts, mask, 0);
  CHECK(base > 0.02 * 0.95);
  CHECK(base < 0.02 * 1.05);
  const double heavy = coord_std(pts, mask, 1);
  const double expect = std::sqrt(0.02 * 0.02 + 0.20 * 0.20);
  CHECK(heavy > expect * 0.95);
  CHECK(heavy < expect * 1.05);
}

TEST_CASE("domain_shift keeps counts, moves labels with resampled points") {
  std::mt19937 rng(16);
  sensor::SampledCloud cloud;
  const int n = 200;
  // 5% of points far below the rest; big gap so axial noise cannot reorder
  for (int i = 0; i < n; ++i) {
    const bool low = i < n / 20;
    cloud.points.push_back(Vec3f{static_cast<float>(rngu::uniform(rng, -0.5, 0.5)),
                                 low ? -10.0f : 10.0f,
                                 static_cast<float>(rngu::uniform(rng, 1.0, 2.0))});
    cloud.label.push_back(low ? 7 : 3);
  }
  sensor::SampledCloud shifted = cloud;
  sensor::domain_shift(shifted, Vec3f{0, 0, 1}, rng);
  REQUIRE(shifted.points.size() == cloud.points.size());
  REQUIRE(shifted.label.size() == cloud.label.size());
  // dropped lows were refilled from survivors, labels follow
  CHECK(std::count(shifted.label.begin(), shifted.label.end(), 7) == 0);
  for (const Vec3f& p : shifted.points) CHECK(p.y > 0.0f);

  // the radial bias pushes the cloud outward by about 1 cm
  double before = 0, after = 0;
  for (int i = 0; i < n; ++i) {
    before += cloud.points[i].norm();
    after += shifted.points[i].norm();
  }
  CHECK((after - before) / n == doctest::Approx(0.01).epsilon(0.5));

  sensor::SampledCloud unlabeled;
  unlabeled.points = cloud.points;
  sensor::domain_shift(unlabeled, Vec3f{0, 0, 1}, rng);
  CHECK(unlabeled.label.empty());
}

TEST_CASE("generated sequences carry consistent labels") {
  data::GenConfig cfg;
  cfg.n_frames = 24;
  cfg.points = 64;
  cfg.surface_oversample = 400;
  cfg.protocols = {body::Protocol::kWalk};
  const body::Skeleton s = body::default_skeleton();
  const data::SequenceSample seq = data::generate_sequence(cfg, 0, s);
  REQUIRE(seq.N == 24);
  REQUIRE(seq.has_gt());
  seq.validate();

  int labeled = 0, tight = 0;
  for (int t = 0; t < seq.N; ++t) {
    const auto& cloud = seq.clouds[t];
    REQUIRE(cloud.points.size() == static_cast<size_t>(seq.P));
    REQUIRE(cloud.label.size() == static_cast<size_t>(seq.P));
    const auto world = data::cloud_world_points(seq, t);
    const body::FkResult f = body::fk(s, seq.gt[t]);
    for (int i = 0; i < seq.P; ++i) {
      const int l = cloud.label[i];
      REQUIRE(l >= 0);
      REQUIRE(l <= seq.J);
      if (l == seq.J) continue;
      ++labeled;
      const float d = (world[i] - f.pos[l]).norm();
      CHECK(d < 1.5f);  // even outliers stay near the body
      if (d <= sensor::kLabelThreshold + 3.0f * sensor::kNoiseSigma) ++tight;
    }
  }
  CHECK(labeled > seq.N * seq.P / 4);  // most of the cloud is on-body
  CHECK(tight > labeled * 9 / 10);     // noise rarely moves a point far
}

TEST_CASE("sequence generation is deterministic and pseudo-real strips truth") {
  data::GenConfig cfg;
  cfg.n_frames = 12;
  cfg.points = 32;
  cfg.surface_oversample = 300;
  const body::Skeleton s = body::default_skeleton();
  const data::SequenceSample a = data::generate_sequence(cfg, 3, s);
  const data::SequenceSample b = data::generate_sequence(cfg, 3, s);
  REQUIRE(a.N == b.N);
  for (int t = 0; t < a.N; ++t) {
    CHECK(a.clouds[t].label == b.clouds[t].label);
    for (int i = 0; i < a.P; ++i)
      CHECK((a.clouds[t].points[i] - b.clouds[t].points[i]).norm() == 0.0f);
    for (int j = 0; j < a.J; ++j)
      CHECK(a.synth[t].local_rot[j] == b.synth[t].local_rot[j]);
  }
  const data::SequenceSample c = data::generate_sequence(cfg, 4, s);
  bool differs = false;
  for (int i = 0; i < a.P && !differs; ++i)
    differs = (a.clouds[0].points[i] - c.clouds[0].points[i]).norm() != 0.0f;
  CHECK(differs);

  cfg.pseudo_real = true;
  const data::SequenceSample r = data::generate_sequence(cfg, 3, s);
  CHECK(!r.has_gt());
  CHECK(r.domain_tag == data::kDomainPseudoReal);
  for (const auto& cloud : r.clouds) CHECK(cloud.label.empty());
  CHECK(r.synth.size() == static_cast<size_t>(r.N));  // synthesis stays available
}
