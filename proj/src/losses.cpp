// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace xrmbt::loss {

double rot_mse(const std::vector<Pose>& z, const std::vector<Pose>& gt) {
  if (z.size() != gt.size() || z.empty())
    throw std::invalid_argument("rot_mse: sequence length mismatch or empty");
  const int J = static_cast<int>(z[0].local_rot.size());
  double sum = 0.0;
  for (size_t t = 0; t < z.size(); ++t)
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < 6; ++k) {
        const double d = static_cast<double>(z[t].local_rot[j].v[k]) -
                         static_cast<double>(gt[t].local_rot[j].v[k]);
        sum += d * d;
      }
  return sum / (static_cast<double>(z.size()) * J);
}

double pos_mse(const Skeleton& s, const std::vector<Pose>& z, const std::vector<Pose>& gt) {
  if (z.size() != gt.size() || z.empty())
    throw std::invalid_argument("pos_mse: sequence length mismatch or empty");
  double sum = 0.0;
  for (size_t t = 0; t < z.size(); ++t) {
    const body::FkResult fz = body::fk(s, z[t]);
    const body::FkResult fg = body::fk(s, gt[t]);
    for (int j = 0; j < s.J; ++j) {
      const Vec3f d = fz.pos[j] - fg.pos[j];
      sum += static_cast<double>(d.x) * d.x + static_cast<double>(d.y) * d.y +
             static_cast<double>(d.z) * d.z;
    }
  }
  return sum / (static_cast<double>(z.size()) * s.J);
}

double ce_loss(const std::vector<ad::Tensor<float>>& probs_seq,
               const std::vector<std::vector<int>>& labels_seq) {
  if (probs_seq.size() != labels_seq.size() || probs_seq.empty())
    throw std::invalid_argument("ce_loss: sequence length mismatch or empty");
  double sum = 0.0;
  long long count = 0;
  for (size_t t = 0; t < probs_seq.size(); ++t) {
    const auto& probs = probs_seq[t];
    const auto& labels = labels_seq[t];
    if (static_cast<int>(labels.size()) != probs.rows())
      throw std::invalid_argument("ce_loss: one label per point required");
    for (int i = 0; i < probs.rows(); ++i) {
      const int l = labels[i];
      if (l < 0 || l >= probs.cols()) throw std::invalid_argument("ce_loss: label out of range");
      sum -= std::log(std::max(static_cast<double>(probs.at(i, l)), ad::kNllFloor));
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double pc_loss(const Skeleton& s, const BodyShape& shape,
               const std::vector<std::vector<Vec3f>>& clouds_world,
               const std::vector<Pose>& z) {
  if (clouds_world.size() != z.size() || z.empty())
    throw std::invalid_argument("pc_loss: sequence length mismatch or empty");
  double sum = 0.0;
  long long count = 0;
  for (size_t t = 0; t < z.size(); ++t) {
    const body::FkResult f = body::fk(s, z[t]);
    const auto caps = sensor::pose_capsules(s, shape, f);
    for (const Vec3f& p : clouds_world[t]) {
      float best = std::numeric_limits<float>::max();
      for (const auto& c : caps)
        best = std::min(best, geom::capsule_surface_distance(p, c.a, c.b, c.r));
      sum += static_cast<double>(best);
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("pc_loss: no points");
  return sum / static_cast<double>(count);
}

JointEvidence joint_evidence(const std::vector<Vec3f>& pts_world,
                             const ad::Tensor<float>& probs, int J) {
  const int P = static_cast<int>(pts_world.size());
  if (probs.rows() != P || probs.cols() != J + 1)
    throw std::invalid_argument("joint_evidence: probs must be [P,J+1]");
  JointEvidence ev;
  ev.support.assign(J, 0.0);
  ev.centroid.assign(J, {});
  ev.active.assign(J, 0);
  for (int j = 0; j < J; ++j) {
    double sup = 0.0;
    geom::Vec3<double> cen{};
    for (int i = 0; i < P; ++i) {
      const double w = static_cast<double>(probs.at(i, j));
      sup += w;
      cen.x += w * pts_world[i].x;
      cen.y += w * pts_world[i].y;
      cen.z += w * pts_world[i].z;
    }
    ev.support[j] = sup;
    if (sup > 0.0) ev.centroid[j] = cen * (1.0 / sup);
    ev.active[j] = sup > kSupportGate * P ? 1 : 0;
  }
  return ev;
}

double spc_loss(const std::vector<JointEvidence>& evidence, const std::vector<Pose>& z,
                const Skeleton& s, float theta) {
  if (evidence.size() != z.size() || z.empty())
    throw std::invalid_argument("spc_loss: sequence length mismatch or empty");
  double frame_sum = 0.0;
  int nonempty = 0;
  for (size_t t = 0; t < z.size(); ++t) {
    const auto& ev = evidence[t];
    const body::FkResult f = body::fk(s, z[t]);
    double hinge_sum = 0.0;
    int n_active = 0;
    for (int j = 0; j < s.J; ++j) {
      if (!ev.active[j]) continue;
      const geom::Vec3<double> d{f.pos[j].x - ev.centroid[j].x, f.pos[j].y - ev.centroid[j].y,
                                 f.pos[j].z - ev.centroid[j].z};
      hinge_sum += std::max(0.0, d.norm() - static_cast<double>(theta));
      ++n_active;
    }
    if (n_active > 0) {
      frame_sum += hinge_sum / n_active;
      ++nonempty;
    }
  }
  return nonempty > 0 ? frame_sum / nonempty : 0.0;
}

double total_loss(double l_rot, double l_pos, double l_ce, double l_spc,
                  const LossWeights& w, bool mocap_domain) {
  const struct {
    const char* name;
    double v;
  } parts[] = {{"l_rot", l_rot}, {"l_pos", l_pos}, {"l_ce", l_ce}, {"l_spc", l_spc}};
  for (const auto& p : parts)
    if (!std::isfinite(p.v))
      throw std::runtime_error(std::string("loss component ") + p.name + " is not finite");
  if (!mocap_domain) return static_cast<double>(w.w_spc) * l_spc;
  return static_cast<double>(w.w_rot) * l_rot + static_cast<double>(w.w_pos) * l_pos +
         static_cast<double>(w.w_ce) * l_ce + static_cast<double>(w.w_spc) * l_spc;
}

ad::Tensor<float> spc_weights(const ad::Tensor<float>& support, int P) {
  const int B = support.rows(), J = support.cols();
  ad::Tensor<float> w = ad::Tensor<float>::zeros({B, J});
  std::vector<int> row_active(B, 0);
  int nonempty = 0;
  for (int b = 0; b < B; ++b) {
    for (int j = 0; j < J; ++j)
      if (static_cast<double>(support.at(b, j)) > kSupportGate * P) ++row_active[b];
    if (row_active[b] > 0) ++nonempty;
  }
  if (nonempty == 0) return w;
  for (int b = 0; b < B; ++b) {
    if (row_active[b] == 0) continue;
    const float v = 1.0f / (static_cast<float>(row_active[b]) * static_cast<float>(nonempty));
    for (int j = 0; j < J; ++j)
      if (static_cast<double>(support.at(b, j)) > kSupportGate * P) w.at(b, j) = v;
  }
  return w;
}

}  // namespace xrmbt::loss
