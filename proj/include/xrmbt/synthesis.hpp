// SPDX-License-Identifier: Apache-2.0
//
// Pluggable 3-point -> full-body synthesis stage. By contract it never sees
// the point cloud; signatures only accept tracked frames (and ground truth
// for the noisy oracle, which is a simulation-only stand-in).
#pragma once

#include <random>
#include <string>
#include <vector>

#include "xrmbt/motion.hpp"
#include "xrmbt/nn.hpp"
#include "xrmbt/skeleton.hpp"

namespace xrmbt::synth {

using body::Pose;
using body::Skeleton;
using body::ThreePointFrame;

enum class LowerMode { kGt, kIdle, kLagged };
LowerMode lower_mode_from_string(const std::string& s);
const char* lower_mode_name(LowerMode m);

struct OracleConfig {
  float upper_sigma = 0.05235988f;  // radians (3 degrees)
  LowerMode lower_mode = LowerMode::kIdle;
  float lag_seconds = 0.5f;
  float fps = 30.0f;
};

/// Ground truth plus angular noise on upper-body joints; lower body replaced
/// per mode (canonical standing sway for kIdle, gt delayed by lag_seconds for
/// kLagged). Root comes from the tracked head, as for any synthesis output.
std::vector<Pose> noisy_oracle(const std::vector<ThreePointFrame>& x,
                               const std::vector<Pose>& gt, const Skeleton& s,
                               const OracleConfig& cfg, std::mt19937& rng);

struct MlpConfig {
  int hidden = 256;
  int J = 22;
};

void mlp_init(nn::ParamStore<float>& ps, const MlpConfig& cfg, std::mt19937& rng);

/// Deterministic per-frame MLP baseline: 54 -> hidden -> hidden -> J*6, plus
/// the head-derived root.
std::vector<Pose> mlp_synthesize(const std::vector<ThreePointFrame>& x, const Skeleton& s,
                                 const nn::ParamStore<float>& ps, const MlpConfig& cfg);

/// Supervised training of the MLP baseline on (x, gt) pairs with the
/// rotation + position losses. Returns the final training loss.
struct MlpTrainConfig {
  int iterations = 400;
  int batch_frames = 256;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};
double mlp_train(nn::ParamStore<float>& ps, const MlpConfig& cfg, const MlpTrainConfig& tc,
                 const Skeleton& s,
                 const std::vector<std::vector<ThreePointFrame>>& x_seqs,
                 const std::vector<std::vector<Pose>>& gt_seqs);

}  // namespace xrmbt::synth
