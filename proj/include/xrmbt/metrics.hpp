// SPDX-License-Identifier: Apache-2.0
//
// Tracking metrics with upper/lower body splits and per-action breakdowns.
// Velocity and jitter use central finite differences:
//   v[t]    = (p[t+1] - p[t-1]) * fps/2      t in [1, N-2]
//   a[t]    = (p[t+1] - 2 p[t] + p[t-1]) * fps^2
//   jerk[t] = (a[t+1] - a[t]) * fps          t in [1, N-3]
// All accumulation in double with fixed order, so identical inputs give
// bit-identical reports.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "xrmbt/fk.hpp"
#include "xrmbt/geometry.hpp"
#include "xrmbt/skeleton.hpp"

namespace xrmbt::metrics {

/// World joint positions per frame, double precision. [frame][joint]
using Track = std::vector<std::vector<geom::Vec3<double>>>;

/// FK at default scale, upcast to double.
Track fk_track(const body::Skeleton& s, const std::vector<body::Pose>& poses);

struct Accum {
  double sum = 0.0;
  long long n = 0;
  void add(double v) { sum += v; ++n; }
  double mean() const { return n > 0 ? sum / n : 0.0; }
};

// Per-sequence accumulators; datasets aggregate by accumulating every
// sequence into the same Accum in a fixed order.
void accum_mpjpe(const Track& pred, const Track& gt, const std::vector<int>& subset, Accum& a);
void accum_mpjre(const std::vector<body::Pose>& pred, const std::vector<body::Pose>& gt,
                 const std::vector<int>& subset, Accum& a);
void accum_mpjve(const Track& pred, const Track& gt, const std::vector<int>& subset, float fps,
                 Accum& a);
void accum_jerk(const Track& track, const std::vector<int>& subset, float fps, Accum& a);

/// Mean joint position error in cm.
double mpjpe(const Track& pred, const Track& gt, const std::vector<int>& subset);
/// Mean geodesic angle between local rotations, radians.
double mpjre(const std::vector<body::Pose>& pred, const std::vector<body::Pose>& gt,
             const std::vector<int>& subset);
/// Mean joint velocity error, m/s. Requires N >= 2 (N in {2} has no interior
/// samples and reports 0).
double mpjve(const Track& pred, const Track& gt, const std::vector<int>& subset,
             float fps = 30.0f);
/// Mean jerk norm of pred divided by that of gt. Requires N >= 4; throws if
/// the gt jerk is below 1e-9 (static ground truth).
double jitter_ratio(const Track& pred, const Track& gt, const std::vector<int>& subset,
                    float fps = 30.0f);

struct MetricRow {
  double mpjpe_up = 0.0, mpjpe_low = 0.0;    // cm
  double mpjre_up = 0.0, mpjre_low = 0.0;    // radians
  double mpjve_up = 0.0, mpjve_low = 0.0;    // m/s
  double jitter_up = 0.0, jitter_low = 0.0;  // pred/gt
  double pc_loss_cm = 0.0;
};

/// Running aggregate over sequences; finalize() turns sums into a MetricRow.
struct RowAccum {
  Accum pe_up, pe_low, re_up, re_low, ve_up, ve_low;
  Accum jerk_pred_up, jerk_gt_up, jerk_pred_low, jerk_gt_low;
  Accum pc;  // meters per point

  void add_sequence(const body::Skeleton& s, const std::vector<body::Pose>& pred,
                    const std::vector<body::Pose>& gt, float fps);
  MetricRow finalize() const;
};

struct MetricReport {
  MetricRow overall;
  std::map<std::string, MetricRow> per_action;
};

bool rows_equal(const MetricRow& a, const MetricRow& b);
bool reports_equal(const MetricReport& a, const MetricReport& b);

/// Fixed-width table, one row per action plus overall.
std::string report_text(const MetricReport& r);
/// Machine-readable form, one header line then one line per row.
std::string report_csv(const MetricReport& r);

}  // namespace xrmbt::metrics
