// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "xrmbt/fk.hpp"
#include "xrmbt/losses.hpp"
#include "xrmbt/rng.hpp"
#include "xrmbt/sensor.hpp"

using namespace xrmbt;
using body::Vec3f;

namespace {

constexpr double kPi = 3.14159265358979323846;

body::Pose random_pose(const body::Skeleton& s, std::mt19937& rng, float max_angle = 1.0f) {
  body::Pose p = body::Pose::rest(s.J);
  for (int j = 0; j < s.J; ++j)
    p.local_rot[j] = geom::matrix_to_rot6d(body::Mat3f::axis_angle(
        rngu::sphere_dir<Vec3f>(rng),
        static_cast<float>(rngu::uniform(rng, -max_angle, max_angle))));
  p.root_pos = {0, 0.9f, 0};
  return p;
}

// full capsule surface (lateral plus both spherical caps), area-uniform
std::vector<Vec3f> dense_capsule_surface(const std::vector<sensor::PosedCapsule>& caps, int n,
                                         std::mt19937& rng) {
  std::vector<double> area;
  double total = 0;
  for (const auto& c : caps) {
    const double len = (c.b - c.a).norm();
    const double a = 2.0 * kPi * c.r * len + 4.0 * kPi * c.r * c.r;
    area.push_back(a);
    total += a;
  }
  std::vector<Vec3f> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int ci = rngu::discrete(rng, area);
    const auto& c = caps[ci];
    const Vec3f axis = (c.b - c.a).normalized();
    const double len = (c.b - c.a).norm();
    const double lat = 2.0 * kPi * c.r * len;
    if (rngu::uniform(rng, 0.0, area[ci]) < lat) {
      // lateral: random height, random azimuth around the axis
      Vec3f u = axis.cross(Vec3f{1, 0, 0});
      if (u.norm() < 1e-4f) u = axis.cross(Vec3f{0, 1, 0});
      u = u.normalized();
      const Vec3f v = axis.cross(u);
      const float t = static_cast<float>(rngu::uniform(rng, 0.0, 1.0));
      const float phi = static_cast<float>(rngu::uniform(rng, 0.0, 2.0 * kPi));
      out.push_back(c.a + (c.b - c.a) * t +
                    (u * std::cos(phi) + v * std::sin(phi)) * c.r);
    } else {
      // caps: uniform sphere direction, snapped to the matching hemisphere
      Vec3f d = rngu::sphere_dir<Vec3f>(rng);
      const bool top = d.dot(axis) >= 0.0f;
      out.push_back((top ? c.b : c.a) + d * c.r);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("rot_mse measures the mean squared 6d difference") {
  const body::Skeleton s = body::default_skeleton();
  std::mt19937 rng(51);
  std::vector<body::Pose> gt = {random_pose(s, rng), random_pose(s, rng)};
  CHECK(loss::rot_mse(gt, gt) == 0.0);

  std::vector<body::Pose> z = gt;
  z[1].local_rot[4].v[0] += 0.3f;
  const double d = static_cast<double>(z[1].local_rot[4].v[0]) -
                   static_cast<double>(gt[1].local_rot[4].v[0]);
  CHECK(loss::rot_mse(z, gt) == doctest::Approx(d * d / (2.0 * s.J)).epsilon(1e-12));

  CHECK_THROWS_AS(loss::rot_mse(z, {gt[0]}), std::invalid_argument);
  CHECK_THROWS_AS(loss::rot_mse({}, {}), std::invalid_argument);
}

TEST_CASE("pos_mse measures mean squared fk displacement") {
  const body::Skeleton s = body::default_skeleton();
  std::mt19937 rng(52);
  std::vector<body::Pose> gt = {random_pose(s, rng)};
  CHECK(loss::pos_mse(s, gt, gt) == 0.0);

  std::vector<body::Pose> z = gt;
  z[0].root_pos.x += 0.1f;  // rigid shift moves every joint by the same delta
  CHECK(loss::pos_mse(s, z, gt) == doctest::Approx(0.01).epsilon(1e-6));

  // independent double-loop oracle on an articulated difference
  z[0] = random_pose(s, rng);
  const body::FkResult fz = body::fk(s, z[0]);
  const body::FkResult fg = body::fk(s, gt[0]);
  double sum = 0;
  for (int j = 0; j < s.J; ++j) sum += (fz.pos[j] - fg.pos[j]).sqnorm();
  CHECK(loss::pos_mse(s, z, gt) == doctest::Approx(sum / s.J).epsilon(1e-6));
}

TEST_CASE("ce_loss is the mean negative log-likelihood") {
  std::mt19937 rng(53);
  const int P = 7, C = 5;
  std::vector<ad::Tensor<float>> probs_seq;
  std::vector<std::vector<int>> labels_seq;
  double expect = 0;
  int count = 0;
  for (int t = 0; t < 3; ++t) {
    ad::Tensor<float> pr = ad::Tensor<float>::zeros({P, C});
    std::vector<int> lab(P);
    for (int i = 0; i < P; ++i) {
      double row = 0;
      for (int k = 0; k < C; ++k) {
        pr.at(i, k) = static_cast<float>(rngu::uniform(rng, 0.01, 1.0));
        row += pr.at(i, k);
      }
      for (int k = 0; k < C; ++k) pr.at(i, k) = static_cast<float>(pr.at(i, k) / row);
      lab[i] = rngu::uniform_int(rng, 0, C - 1);
      expect -= std::log(static_cast<double>(pr.at(i, lab[i])));
      ++count;
    }
    probs_seq.push_back(std::move(pr));
    labels_seq.push_back(std::move(lab));
  }
  CHECK(loss::ce_loss(probs_seq, labels_seq) == doctest::Approx(expect / count).epsilon(1e-12));

  // uniform over 23 classes scores ln(23)
  ad::Tensor<float> uni = ad::Tensor<float>::zeros({4, 23});
  for (float& v : uni.data) v = 1.0f / 23.0f;
  CHECK(loss::ce_loss({uni}, {{0, 5, 11, 22}}) ==
        doctest::Approx(std::log(23.0)).epsilon(1e-6));

  // zero probability hits the log floor instead of -inf
  ad::Tensor<float> z = ad::Tensor<float>::zeros({1, 3});
  z.at(0, 1) = 1.0f;
  CHECK(loss::ce_loss({z}, {{0}}) == doctest::Approx(-std::log(ad::kNllFloor)).epsilon(1e-12));

  CHECK_THROWS_AS(loss::ce_loss({z}, {{3}}), std::invalid_argument);
  CHECK_THROWS_AS(loss::ce_loss({z}, {{0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(loss::ce_loss({}, {}), std::invalid_argument);
}

TEST_CASE("pc_loss equals distance to a densely discretized body surface") {
  const body::Skeleton s = body::default_skeleton();
  const body::BodyShape shape = body::default_shape();
  std::mt19937 rng(54);
  const body::Pose pose = random_pose(s, rng, 0.6f);
  const body::FkResult f = body::fk(s, pose);
  const auto caps = sensor::pose_capsules(s, shape, f);
  const auto surface = dense_capsule_surface(caps, 30000, rng);

  // interior points cost nothing
  CHECK(loss::pc_loss(s, shape, {{f.pos[body::kPelvis]}}, {pose}) == 0.0);

  // exterior queries at least 10 cm out, one frame per query for a clean oracle
  int tested = 0;
  while (tested < 40) {
    Vec3f q{static_cast<float>(rngu::uniform(rng, -1.2, 1.2)),
            static_cast<float>(rngu::uniform(rng, -0.4, 2.2)),
            static_cast<float>(rngu::uniform(rng, -1.2, 1.2))};
    float analytic = 1e30f;
    for (const auto& c : caps)
      analytic = std::min(analytic, geom::point_segment_distance(q, c.a, c.b) - c.r);
    if (analytic < 0.1f || analytic > 1.0f) continue;
    ++tested;
    float sampled = 1e30f;
    for (const Vec3f& sp : surface) sampled = std::min(sampled, (q - sp).norm());
    CHECK(std::abs(loss::pc_loss(s, shape, {{q}}, {pose}) - sampled) <= 2e-3);
  }

  CHECK_THROWS_AS(loss::pc_loss(s, shape, {{}}, {pose}), std::invalid_argument);
  CHECK_THROWS_AS(loss::pc_loss(s, shape, {}, {}), std::invalid_argument);
}

TEST_CASE("joint_evidence accumulates probability-weighted centroids") {
  const std::vector<Vec3f> pts = {{1, 0, 0}, {0, 2, 0}, {0, 0, 3}, {4, 4, 4}};
  ad::Tensor<float> probs = ad::Tensor<float>::zeros({4, 3});  // J=2 plus background
  probs.at(0, 0) = 1.0f;
  probs.at(1, 1) = 1.0f;
  probs.at(2, 0) = 0.5f;
  probs.at(2, 1) = 0.5f;
  probs.at(3, 2) = 1.0f;
  const auto ev = loss::joint_evidence(pts, probs, 2);
  REQUIRE(ev.support.size() == 2);
  CHECK(ev.support[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(ev.support[1] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(ev.centroid[0].x == doctest::Approx(1.0 / 1.5).epsilon(1e-9));
  CHECK(ev.centroid[0].z == doctest::Approx(1.5 / 1.5).epsilon(1e-9));
  CHECK(ev.centroid[1].y == doctest::Approx(2.0 / 1.5).epsilon(1e-9));
  CHECK(ev.active[0] == 1);  // gate is 0.05 * 4 = 0.2
  CHECK(ev.active[1] == 1);

  // uniform over 23 classes at P=100: support 100/23 < 5, nothing active
  ad::Tensor<float> uni = ad::Tensor<float>::zeros({100, 23});
  for (float& v : uni.data) v = 1.0f / 23.0f;
  std::vector<Vec3f> cloud(100, Vec3f{0.5f, 0.5f, 0.5f});
  const auto uev = loss::joint_evidence(cloud, uni, 22);
  for (int j = 0; j < 22; ++j) {
    CHECK(uev.support[j] == doctest::Approx(100.0 / 23.0).epsilon(1e-4));
    CHECK(uev.active[j] == 0);
  }

  CHECK_THROWS_AS(loss::joint_evidence(pts, probs, 3), std::invalid_argument);
}

TEST_CASE("spc_loss hinge and frame averaging are exact") {
  const body::Skeleton s = body::default_skeleton();
  const body::Pose rest = body::Pose::rest(s.J);
  const body::FkResult f = body::fk(s, rest);

  loss::JointEvidence none;
  none.support.assign(s.J, 0.0);
  none.centroid.assign(s.J, {});
  none.active.assign(s.J, 0);

  // a single active joint displaced exactly 0.25 m
  loss::JointEvidence one = none;
  one.active[body::kWristL] = 1;
  one.centroid[body::kWristL] = {static_cast<double>(f.pos[body::kWristL].x) + 0.25,
                                 static_cast<double>(f.pos[body::kWristL].y),
                                 static_cast<double>(f.pos[body::kWristL].z)};
  const double expect = 0.25 - static_cast<double>(loss::kSpcTheta);
  CHECK(loss::spc_loss({one}, {rest}, s) == expect);  // exact equality

  // a frame with no active joints drops out of the average entirely
  CHECK(loss::spc_loss({one, none}, {rest, rest}, s) == expect);
  CHECK(loss::spc_loss({none, none}, {rest, rest}, s) == 0.0);

  // within a frame the hinge averages over active joints
  loss::JointEvidence two = one;
  two.active[body::kWristR] = 1;
  two.centroid[body::kWristR] = {static_cast<double>(f.pos[body::kWristR].x),
                                 static_cast<double>(f.pos[body::kWristR].y) + 0.5,
                                 static_cast<double>(f.pos[body::kWristR].z)};
  const double h2 = 0.5 - static_cast<double>(loss::kSpcTheta);
  CHECK(loss::spc_loss({two}, {rest}, s) == doctest::Approx((expect + h2) / 2).epsilon(1e-12));

  // inside theta the hinge is flat zero
  loss::JointEvidence close = none;
  close.active[3] = 1;
  close.centroid[3] = {static_cast<double>(f.pos[3].x) + 0.05, static_cast<double>(f.pos[3].y),
                       static_cast<double>(f.pos[3].z)};
  CHECK(loss::spc_loss({close}, {rest}, s) == 0.0);

  CHECK_THROWS_AS(loss::spc_loss({}, {}, s), std::invalid_argument);
}

TEST_CASE("total_loss weights components and rejects non-finite terms") {
  loss::LossWeights w;
  // weights are stored as float; promote them the same way total_loss does
  CHECK(loss::total_loss(2.0, 3.0, 4.0, 5.0, w, true) ==
        doctest::Approx(static_cast<double>(w.w_rot) * 2.0 + static_cast<double>(w.w_pos) * 3.0 +
                        static_cast<double>(w.w_ce) * 4.0 + static_cast<double>(w.w_spc) * 5.0)
            .epsilon(1e-12));
  CHECK(loss::total_loss(2.0, 3.0, 4.0, 5.0, w, false) ==
        doctest::Approx(static_cast<double>(w.w_spc) * 5.0).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(
      loss::total_loss(1.0, 1.0, std::nan(""), 1.0, w, true),
      "loss component l_ce is not finite", std::runtime_error);
  CHECK_THROWS_WITH_AS(
      loss::total_loss(std::numeric_limits<double>::infinity(), 1.0, 1.0, 1.0, w, true),
      "loss component l_rot is not finite", std::runtime_error);
}

TEST_CASE("spc_weights normalize the active set to unit total") {
  ad::Tensor<float> support = ad::Tensor<float>::zeros({3, 3});
  support.at(0, 0) = 10.0f;  // active (gate 0.05*100 = 5)
  support.at(0, 1) = 6.0f;   // active
  support.at(0, 2) = 1.0f;
  support.at(2, 1) = 8.0f;  // active, second nonempty row
  const auto w = loss::spc_weights(support, 100);
  CHECK(w.at(0, 0) == 0.25f);  // 1 / (2 active * 2 nonempty)
  CHECK(w.at(0, 1) == 0.25f);
  CHECK(w.at(0, 2) == 0.0f);
  CHECK(w.at(1, 0) == 0.0f);
  CHECK(w.at(2, 1) == 0.5f);
  double total = 0;
  for (float v : w.data) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  ad::Tensor<float> quiet = ad::Tensor<float>::zeros({2, 3});
  const auto wq = loss::spc_weights(quiet, 100);
  for (float v : wq.data) CHECK(v == 0.0f);
}

TEST_CASE("graph losses match their plain counterparts") {
  const body::Skeleton s = body::default_skeleton();
  std::mt19937 rng(55);
  std::vector<body::Pose> z, gt;
  for (int t = 0; t < 3; ++t) {
    z.push_back(random_pose(s, rng));
    gt.push_back(random_pose(s, rng));
  }
  ad::Graph<float> g;
  const ad::NodeId lr = loss::graph::rot_mse(g, g.constant(body::poses_to_rot6_rows(z)),
                                             g.constant(body::poses_to_rot6_rows(gt)));
  CHECK(g.val(lr).data[0] == doctest::Approx(loss::rot_mse(z, gt)).epsilon(1e-5));

  ad::Tensor<float> pz = ad::Tensor<float>::zeros({3, s.J * 3});
  ad::Tensor<float> pg = ad::Tensor<float>::zeros({3, s.J * 3});
  for (int t = 0; t < 3; ++t) {
    const body::FkResult fz = body::fk(s, z[t]);
    const body::FkResult fg = body::fk(s, gt[t]);
    for (int j = 0; j < s.J; ++j)
      for (int k = 0; k < 3; ++k) {
        pz.at(t, 3 * j + k) = k == 0 ? fz.pos[j].x : (k == 1 ? fz.pos[j].y : fz.pos[j].z);
        pg.at(t, 3 * j + k) = k == 0 ? fg.pos[j].x : (k == 1 ? fg.pos[j].y : fg.pos[j].z);
      }
  }
  const ad::NodeId lp = loss::graph::pos_mse(g, g.constant(pz), g.constant(pg));
  CHECK(g.val(lp).data[0] == doctest::Approx(loss::pos_mse(s, z, gt)).epsilon(1e-5));
}

TEST_CASE("graph spc hinge reproduces the float-exact unit case") {
  // one frame, one joint, centroid 0.25 m away, unit weight
  ad::Graph<float> g;
  ad::Tensor<float> pos = ad::Tensor<float>::zeros({1, 3});
  ad::Tensor<float> cen = ad::Tensor<float>::zeros({1, 3});
  cen.at(0, 0) = 0.25f;
  ad::Tensor<float> w = ad::Tensor<float>::zeros({1, 1});
  w.at(0, 0) = 1.0f;
  const ad::NodeId l =
      loss::graph::spc_hinge(g, g.constant(pos), g.constant(cen), w, loss::kSpcTheta);
  CHECK(g.val(l).data[0] == 0.15f);  // bitwise: 0.25f - 0.10f is exact
}

TEST_CASE("graph spc hinge with folded weights equals plain spc_loss") {
  const body::Skeleton s = body::default_skeleton();
  std::mt19937 rng(56);
  const int B = 3, P = 20;
  std::vector<body::Pose> z;
  std::vector<loss::JointEvidence> evidence;
  ad::Tensor<float> support = ad::Tensor<float>::zeros({B, s.J});
  ad::Tensor<float> pos = ad::Tensor<float>::zeros({B, s.J * 3});
  ad::Tensor<float> cen = ad::Tensor<float>::zeros({B, s.J * 3});
  for (int b = 0; b < B; ++b) {
    z.push_back(random_pose(s, rng));
    const body::FkResult f = body::fk(s, z[b]);
    loss::JointEvidence ev;
    ev.support.assign(s.J, 0.0);
    ev.centroid.assign(s.J, {});
    ev.active.assign(s.J, 0);
    for (int j = 0; j < s.J; ++j) {
      // frame 2 stays inactive to exercise the nonempty-frame normalizer
      const float sup = b == 2 ? 0.5f : static_cast<float>(rngu::uniform(rng, 0.0, 3.0));
      support.at(b, j) = sup;
      ev.support[j] = sup;
      ev.active[j] = sup > loss::kSupportGate * P ? 1 : 0;
      const Vec3f c = f.pos[j] + rngu::sphere_dir<Vec3f>(rng) *
                                     static_cast<float>(rngu::uniform(rng, 0.0, 0.4));
      ev.centroid[j] = {c.x, c.y, c.z};
      cen.at(b, 3 * j) = c.x;
      cen.at(b, 3 * j + 1) = c.y;
      cen.at(b, 3 * j + 2) = c.z;
      pos.at(b, 3 * j) = f.pos[j].x;
      pos.at(b, 3 * j + 1) = f.pos[j].y;
      pos.at(b, 3 * j + 2) = f.pos[j].z;
    }
    evidence.push_back(std::move(ev));
  }
  const double plain = loss::spc_loss(evidence, z, s);
  ad::Graph<float> g;
  const ad::NodeId l = loss::graph::spc_hinge(g, g.constant(pos), g.constant(cen),
                                              loss::spc_weights(support, P), loss::kSpcTheta);
  CHECK(g.val(l).data[0] == doctest::Approx(plain).epsilon(1e-5));

  ad::Tensor<float> bad = ad::Tensor<float>::zeros({B, s.J - 1});
  CHECK_THROWS_AS(
      loss::graph::spc_hinge(g, g.constant(pos), g.constant(cen), bad, loss::kSpcTheta),
      std::invalid_argument);
}

TEST_CASE("evidence_graph matches joint_evidence and passes gradients") {
  std::mt19937 rng(57);
  const int P = 5, J = 2, B = 1;
  ad::Tensor<float> logits = ad::Tensor<float>::zeros({B * P, J + 1});
  for (float& v : logits.data) v = static_cast<float>(rngu::uniform(rng, -1.0, 1.0));
  ad::Tensor<float> points = ad::Tensor<float>::zeros({B * P, 3});
  for (float& v : points.data) v = static_cast<float>(rngu::uniform(rng, -1.0, 1.0));

  ad::Graph<float> g;
  const ad::NodeId lg = g.param(logits);
  const ad::NodeId probs = g.softmax_rows(lg);
  const auto ev = loss::graph::evidence_graph(g, probs, points, P, J);

  std::vector<Vec3f> pts(P);
  for (int i = 0; i < P; ++i) pts[i] = {points.at(i, 0), points.at(i, 1), points.at(i, 2)};
  const auto plain = loss::joint_evidence(pts, g.val(probs), J);
  for (int j = 0; j < J; ++j) {
    CHECK(g.val(ev.support).at(0, j) == doctest::Approx(plain.support[j]).epsilon(1e-5));
    CHECK(g.val(ev.cen).at(0, 3 * j) == doctest::Approx(plain.centroid[j].x).epsilon(1e-4));
    CHECK(g.val(ev.cen).at(0, 3 * j + 1) == doctest::Approx(plain.centroid[j].y).epsilon(1e-4));
  }

  // live evidence: hinge gradients reach the registration logits
  ad::Tensor<float> pos = ad::Tensor<float>::zeros({B, J * 3});
  for (float& v : pos.data) v = 1.0f;  // far from centroids, hinge active
  ad::Tensor<float> w = ad::Tensor<float>::zeros({B, J});
  for (float& v : w.data) v = 0.5f;
  const ad::NodeId live =
      loss::graph::spc_hinge(g, g.constant(pos), ev.cen, w, loss::kSpcTheta);
  g.backward(live);
  double live_mag = 0;
  for (float v : g.grad(lg).data) live_mag += std::abs(v);
  CHECK(live_mag > 0.0);

  // detached evidence: the same hinge on constant centroids leaves them alone
  ad::Graph<float> g2;
  const ad::NodeId lg2 = g2.param(logits);
  g2.softmax_rows(lg2);  // registration exists but the loss never touches it
  const ad::NodeId det = loss::graph::spc_hinge(
      g2, g2.constant(pos), g2.constant(g.val(ev.cen)), w, loss::kSpcTheta);
  g2.backward(det);
  for (float v : g2.grad(lg2).data) CHECK(v == 0.0f);

  CHECK_THROWS_AS(loss::graph::evidence_graph(g, probs, points, P + 1, J),
                  std::invalid_argument);
}
