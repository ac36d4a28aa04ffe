// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/synthesis.hpp"

#include <cmath>
#include <stdexcept>

#include "xrmbt/adam.hpp"
#include "xrmbt/fk.hpp"
#include "xrmbt/rng.hpp"

namespace xrmbt::synth {

using body::Mat3f;
using body::Rot6f;
using body::Vec3f;

LowerMode lower_mode_from_string(const std::string& s) {
  if (s == "gt") return LowerMode::kGt;
  if (s == "idle") return LowerMode::kIdle;
  if (s == "lagged") return LowerMode::kLagged;
  throw std::invalid_argument("unknown lower mode '" + s + "'");
}

const char* lower_mode_name(LowerMode m) {
  switch (m) {
    case LowerMode::kGt: return "gt";
    case LowerMode::kIdle: return "idle";
    case LowerMode::kLagged: return "lagged";
  }
  return "?";
}

namespace {
Pose root_from_head(const Skeleton& s, const ThreePointFrame& xf, int J) {
  Pose p = Pose::rest(J);
  const Mat3f head_rot = geom::rot6d_to_matrix(xf.head.rot);
  body::derive_root_from_head(s, xf.head.pos, head_rot, 1.0f, p.root_pos, p.root_rot);
  return p;
}

// gentle canonical standing sway for the idle lower-body replacement
void idle_legs(Pose& p, double t_seconds) {
  const double a = 0.03 * std::sin(2.0 * 3.14159265358979323846 * t_seconds / 2.0);
  p.local_rot[body::kHipL] = geom::matrix_to_rot6d(Mat3f::rot_x(static_cast<float>(-a)));
  p.local_rot[body::kHipR] = geom::matrix_to_rot6d(Mat3f::rot_x(static_cast<float>(a)));
  p.local_rot[body::kKneeL] = geom::matrix_to_rot6d(Mat3f::rot_x(0.05f));
  p.local_rot[body::kKneeR] = geom::matrix_to_rot6d(Mat3f::rot_x(0.05f));
  p.local_rot[body::kAnkleL] = Rot6f::identity();
  p.local_rot[body::kAnkleR] = Rot6f::identity();
  p.local_rot[body::kFootL] = Rot6f::identity();
  p.local_rot[body::kFootR] = Rot6f::identity();
}
}  // namespace

std::vector<Pose> noisy_oracle(const std::vector<ThreePointFrame>& x,
                               const std::vector<Pose>& gt, const Skeleton& s,
                               const OracleConfig& cfg, std::mt19937& rng) {
  if (x.size() != gt.size()) throw std::invalid_argument("noisy_oracle: x/gt length mismatch");
  const int n = static_cast<int>(x.size());
  const int lag = static_cast<int>(std::lround(cfg.lag_seconds * cfg.fps));
  const std::vector<int>& lower = body::lower_body_joints();
  std::vector<Pose> out;
  out.reserve(n);
  for (int t = 0; t < n; ++t) {
    Pose p = root_from_head(s, x[t], s.J);
    p.local_rot = gt[t].local_rot;
    if (cfg.upper_sigma > 0.0f) {
      for (int j = 0; j < s.J; ++j) {
        bool is_lower = false;
        for (int l : lower) is_lower |= (l == j);
        if (is_lower) continue;
        const Vec3f axis = rngu::sphere_dir<Vec3f>(rng);
        const float ang = static_cast<float>(cfg.upper_sigma * rngu::normal(rng));
        const Mat3f noisy =
            geom::rot6d_to_matrix(p.local_rot[j]) * Mat3f::axis_angle(axis, ang);
        p.local_rot[j] = geom::matrix_to_rot6d(noisy);
      }
    }
    switch (cfg.lower_mode) {
      case LowerMode::kGt:
        break;
      case LowerMode::kIdle:
        idle_legs(p, t / static_cast<double>(cfg.fps));
        break;
      case LowerMode::kLagged: {
        const int src = std::max(0, t - lag);
        for (int l : lower) p.local_rot[l] = gt[src].local_rot[l];
        break;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

void mlp_init(nn::ParamStore<float>& ps, const MlpConfig& cfg, std::mt19937& rng) {
  nn::add_linear(ps, "synth.l1", 54, cfg.hidden, rng);
  nn::add_linear(ps, "synth.l2", cfg.hidden, cfg.hidden, rng);
  nn::add_linear(ps, "synth.out", cfg.hidden, cfg.J * 6, rng);
}

namespace {
template <typename T>
ad::NodeId mlp_graph(ad::Graph<T>& g, const nn::ParamStore<T>& ps,
                     const std::vector<ad::NodeId>& bound, ad::NodeId x) {
  ad::NodeId h = nn::linear_relu(g, x, nn::linear_ref(ps, bound, "synth.l1"));
  h = nn::linear_relu(g, h, nn::linear_ref(ps, bound, "synth.l2"));
  return nn::linear(g, h, nn::linear_ref(ps, bound, "synth.out"));
}

ad::Tensor<float> frames_to_rows(const std::vector<ThreePointFrame>& x) {
  ad::Tensor<float> t = ad::Tensor<float>::zeros({static_cast<int>(x.size()), 54});
  for (size_t i = 0; i < x.size(); ++i) {
    const auto flat = x[i].flat();
    for (int k = 0; k < 54; ++k) t.at(static_cast<int>(i), k) = flat[k];
  }
  return t;
}
}  // namespace

std::vector<Pose> mlp_synthesize(const std::vector<ThreePointFrame>& x, const Skeleton& s,
                                 const nn::ParamStore<float>& ps, const MlpConfig& cfg) {
  ad::Graph<float> g;
  // inference only: bind as constants so no gradient buffers get allocated
  std::vector<ad::NodeId> bound;
  bound.reserve(ps.entries.size());
  for (const auto& e : ps.entries) bound.push_back(g.constant(e.value));
  const ad::NodeId out = mlp_graph(g, ps, bound, g.constant(frames_to_rows(x)));
  const ad::Tensor<float>& rot = g.val(out);

  std::vector<Pose> poses;
  poses.reserve(x.size());
  for (size_t t = 0; t < x.size(); ++t) {
    Pose p = root_from_head(s, x[t], cfg.J);
    for (int j = 0; j < cfg.J; ++j)
      for (int k = 0; k < 6; ++k) p.local_rot[j].v[k] = rot.at(static_cast<int>(t), 6 * j + k);
    poses.push_back(std::move(p));
  }
  return poses;
}

double mlp_train(nn::ParamStore<float>& ps, const MlpConfig& cfg, const MlpTrainConfig& tc,
                 const Skeleton& s,
                 const std::vector<std::vector<ThreePointFrame>>& x_seqs,
                 const std::vector<std::vector<Pose>>& gt_seqs) {
  if (x_seqs.empty() || x_seqs.size() != gt_seqs.size())
    throw std::invalid_argument("mlp_train: bad dataset");
  std::mt19937 rng(static_cast<std::uint32_t>(tc.seed));
  opt::Adam<float> adam;
  adam.lr = tc.lr;
  adam.init(ps);

  double last = 0.0;
  for (int it = 0; it < tc.iterations; ++it) {
    // sample a batch of frames across sequences
    std::vector<ThreePointFrame> xs;
    std::vector<Pose> gts;
    xs.reserve(tc.batch_frames);
    for (int b = 0; b < tc.batch_frames; ++b) {
      const int si = rngu::uniform_int(rng, 0, static_cast<int>(x_seqs.size()) - 1);
      const int fi = rngu::uniform_int(rng, 0, static_cast<int>(x_seqs[si].size()) - 1);
      xs.push_back(x_seqs[si][fi]);
      gts.push_back(gt_seqs[si][fi]);
    }
    ad::Graph<float> g;
    const std::vector<ad::NodeId> bound = nn::bind_params(g, ps);
    const ad::NodeId pred6 = mlp_graph(g, ps, bound, g.constant(frames_to_rows(xs)));
    const ad::NodeId gt6 = g.constant(body::poses_to_rot6_rows(gts));
    const ad::NodeId diff = g.sub(pred6, gt6);
    const ad::NodeId l_rot = g.scale(g.mean_all(g.mul(diff, diff)), 6.0f);
    // position term through FK, root taken from gt
    const ad::NodeId pos = body::graph::fk_positions(
        g, s, 1.0f, pred6, g.constant(body::poses_to_root_pos_rows(gts)),
        g.constant(body::poses_to_root_rot_rows(gts)));
    ad::Tensor<float> gt_pos = ad::Tensor<float>::zeros({static_cast<int>(gts.size()), s.J * 3});
    for (size_t b = 0; b < gts.size(); ++b) {
      const body::FkResult f = body::fk(s, gts[b], 1.0f);
      for (int j = 0; j < s.J; ++j) {
        gt_pos.at(static_cast<int>(b), 3 * j) = f.pos[j].x;
        gt_pos.at(static_cast<int>(b), 3 * j + 1) = f.pos[j].y;
        gt_pos.at(static_cast<int>(b), 3 * j + 2) = f.pos[j].z;
      }
    }
    const ad::NodeId pdiff = g.sub(pos, g.constant(std::move(gt_pos)));
    const ad::NodeId l_pos = g.scale(g.mean_all(g.mul(pdiff, pdiff)), 3.0f);
    const ad::NodeId total = g.add(l_rot, g.scale(l_pos, 0.01f));
    g.backward(total);
    last = static_cast<double>(g.val(total).data[0]);

    std::vector<ad::Tensor<float>> grads;
    grads.reserve(bound.size());
    for (ad::NodeId id : bound) grads.push_back(g.grad(id));
    adam.step(ps, grads);
  }
  return last;
}

}  // namespace xrmbt::synth
