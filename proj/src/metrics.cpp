// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace xrmbt::metrics {

namespace {

void check_aligned(size_t np, size_t ng, const char* what) {
  if (np != ng || np == 0)
    throw std::invalid_argument(std::string(what) + ": sequences must be aligned and nonempty");
}

geom::Vec3<double> central_vel(const Track& p, int t, int j, double fps) {
  return (p[t + 1][j] - p[t - 1][j]) * (fps * 0.5);
}

geom::Vec3<double> central_acc(const Track& p, int t, int j, double fps) {
  return (p[t + 1][j] - p[t][j] * 2.0 + p[t - 1][j]) * (fps * fps);
}

}  // namespace

Track fk_track(const body::Skeleton& s, const std::vector<body::Pose>& poses) {
  Track out(poses.size());
  for (size_t t = 0; t < poses.size(); ++t) {
    const body::FkResult f = body::fk(s, poses[t]);
    out[t].resize(s.J);
    for (int j = 0; j < s.J; ++j)
      out[t][j] = {static_cast<double>(f.pos[j].x), static_cast<double>(f.pos[j].y),
                   static_cast<double>(f.pos[j].z)};
  }
  return out;
}

void accum_mpjpe(const Track& pred, const Track& gt, const std::vector<int>& subset, Accum& a) {
  check_aligned(pred.size(), gt.size(), "mpjpe");
  for (size_t t = 0; t < pred.size(); ++t)
    for (int j : subset) a.add((pred[t][j] - gt[t][j]).norm());
}

void accum_mpjre(const std::vector<body::Pose>& pred, const std::vector<body::Pose>& gt,
                 const std::vector<int>& subset, Accum& a) {
  check_aligned(pred.size(), gt.size(), "mpjre");
  for (size_t t = 0; t < pred.size(); ++t)
    for (int j : subset) {
      const auto rp = geom::rot6d_to_matrix(pred[t].local_rot[j].template cast<double>());
      const auto rg = geom::rot6d_to_matrix(gt[t].local_rot[j].template cast<double>());
      a.add(geom::rotation_angle_between(rp, rg));
    }
}

void accum_mpjve(const Track& pred, const Track& gt, const std::vector<int>& subset, float fps,
                 Accum& a) {
  check_aligned(pred.size(), gt.size(), "mpjve");
  const int n = static_cast<int>(pred.size());
  for (int t = 1; t <= n - 2; ++t)
    for (int j : subset)
      a.add((central_vel(pred, t, j, fps) - central_vel(gt, t, j, fps)).norm());
}

void accum_jerk(const Track& track, const std::vector<int>& subset, float fps, Accum& a) {
  const int n = static_cast<int>(track.size());
  for (int t = 1; t <= n - 3; ++t)
    for (int j : subset)
      a.add(((central_acc(track, t + 1, j, fps) - central_acc(track, t, j, fps)) *
             static_cast<double>(fps))
                .norm());
}

double mpjpe(const Track& pred, const Track& gt, const std::vector<int>& subset) {
  Accum a;
  accum_mpjpe(pred, gt, subset, a);
  return a.mean() * 100.0;
}

double mpjre(const std::vector<body::Pose>& pred, const std::vector<body::Pose>& gt,
             const std::vector<int>& subset) {
  Accum a;
  accum_mpjre(pred, gt, subset, a);
  return a.mean();
}

double mpjve(const Track& pred, const Track& gt, const std::vector<int>& subset, float fps) {
  if (pred.size() < 2) throw std::invalid_argument("mpjve: need at least 2 frames");
  Accum a;
  accum_mpjve(pred, gt, subset, fps, a);
  return a.mean();
}

double jitter_ratio(const Track& pred, const Track& gt, const std::vector<int>& subset,
                    float fps) {
  check_aligned(pred.size(), gt.size(), "jitter_ratio");
  if (pred.size() < 4) throw std::invalid_argument("jitter_ratio: need at least 4 frames");
  Accum ap, ag;
  accum_jerk(pred, subset, fps, ap);
  accum_jerk(gt, subset, fps, ag);
  if (ag.mean() < 1e-9) throw std::invalid_argument("jitter_ratio: ground-truth jerk degenerate");
  return ap.mean() / ag.mean();
}

void RowAccum::add_sequence(const body::Skeleton& s, const std::vector<body::Pose>& pred,
                            const std::vector<body::Pose>& gt, float fps) {
  const Track tp = fk_track(s, pred);
  const Track tg = fk_track(s, gt);
  const auto up = body::upper_body_joints(s.J);
  const auto low = body::lower_body_joints();
  accum_mpjpe(tp, tg, up, pe_up);
  accum_mpjpe(tp, tg, low, pe_low);
  accum_mpjre(pred, gt, up, re_up);
  accum_mpjre(pred, gt, low, re_low);
  accum_mpjve(tp, tg, up, fps, ve_up);
  accum_mpjve(tp, tg, low, fps, ve_low);
  accum_jerk(tp, up, fps, jerk_pred_up);
  accum_jerk(tg, up, fps, jerk_gt_up);
  accum_jerk(tp, low, fps, jerk_pred_low);
  accum_jerk(tg, low, fps, jerk_gt_low);
}

MetricRow RowAccum::finalize() const {
  MetricRow r;
  r.mpjpe_up = pe_up.mean() * 100.0;
  r.mpjpe_low = pe_low.mean() * 100.0;
  r.mpjre_up = re_up.mean();
  r.mpjre_low = re_low.mean();
  r.mpjve_up = ve_up.mean();
  r.mpjve_low = ve_low.mean();
  if (jerk_gt_up.mean() < 1e-9 || jerk_gt_low.mean() < 1e-9)
    throw std::invalid_argument("metrics: ground-truth jerk degenerate");
  r.jitter_up = jerk_pred_up.mean() / jerk_gt_up.mean();
  r.jitter_low = jerk_pred_low.mean() / jerk_gt_low.mean();
  r.pc_loss_cm = pc.mean() * 100.0;
  return r;
}

bool rows_equal(const MetricRow& a, const MetricRow& b) {
  return a.mpjpe_up == b.mpjpe_up && a.mpjpe_low == b.mpjpe_low && a.mpjre_up == b.mpjre_up &&
         a.mpjre_low == b.mpjre_low && a.mpjve_up == b.mpjve_up && a.mpjve_low == b.mpjve_low &&
         a.jitter_up == b.jitter_up && a.jitter_low == b.jitter_low &&
         a.pc_loss_cm == b.pc_loss_cm;
}

bool reports_equal(const MetricReport& a, const MetricReport& b) {
  if (!rows_equal(a.overall, b.overall)) return false;
  if (a.per_action.size() != b.per_action.size()) return false;
  auto ia = a.per_action.begin();
  auto ib = b.per_action.begin();
  for (; ia != a.per_action.end(); ++ia, ++ib)
    if (ia->first != ib->first || !rows_equal(ia->second, ib->second)) return false;
  return true;
}

namespace {

std::string format_row(const std::string& name, const MetricRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%-12s %8.3f %8.3f  %7.4f %7.4f  %7.3f %7.3f  %8.3f %8.3f  %7.3f\n", name.c_str(),
                r.mpjpe_up, r.mpjpe_low, r.mpjre_up, r.mpjre_low, r.mpjve_up, r.mpjve_low,
                r.jitter_up, r.jitter_low, r.pc_loss_cm);
  return buf;
}

std::string csv_row(const std::string& name, const MetricRow& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                name.c_str(), r.mpjpe_up, r.mpjpe_low, r.mpjre_up, r.mpjre_low, r.mpjve_up,
                r.mpjve_low, r.jitter_up, r.jitter_low, r.pc_loss_cm);
  return buf;
}

}  // namespace

std::string report_text(const MetricReport& r) {
  std::string out;
  out += "metrics (central differences; up = upper body, low = lower body)\n";
  out +=
      "action       mpjpe_up mpjpe_lo  re_up   re_low   ve_up   ve_low  jitter_u jitter_l  pc_cm\n";
  out +=
      "             (cm)     (cm)      (rad)   (rad)    (m/s)   (m/s)   (p/g)    (p/g)     (cm)\n";
  out += format_row("overall", r.overall);
  for (const auto& [name, row] : r.per_action) out += format_row(name, row);
  return out;
}

std::string report_csv(const MetricReport& r) {
  std::string out =
      "action,mpjpe_up_cm,mpjpe_low_cm,mpjre_up_rad,mpjre_low_rad,"
      "mpjve_up,mpjve_low,jitter_up,jitter_low,pc_loss_cm\n";
  out += csv_row("overall", r.overall);
  for (const auto& [name, row] : r.per_action) out += csv_row(name, row);
  return out;
}

}  // namespace xrmbt::metrics
