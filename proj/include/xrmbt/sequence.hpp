// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xrmbt/motion.hpp"
#include "xrmbt/sensor.hpp"
#include "xrmbt/skeleton.hpp"
#include "xrmbt/synthesis.hpp"

namespace xrmbt::data {

using body::Pose;
using body::Protocol;
using body::Skeleton;
using body::ThreePointFrame;

inline constexpr const char* kDomainMocap = "mocap";
inline constexpr const char* kDomainPseudoReal = "pseudo-real";

/// One aligned sequence: tracked frames, clouds, a bundled synthesis sample
/// (the fixed evaluation draw), and optional ground truth. Pseudo-real
/// sequences carry no gt poses or labels.
struct SequenceSample {
  int N = 0, P = 0, J = 0;
  float fps = 30.0f;
  std::string protocol;
  std::string domain_tag = kDomainMocap;
  sensor::SensorRig rig;
  std::vector<ThreePointFrame> x;
  std::vector<sensor::SampledCloud> clouds;
  std::vector<Pose> synth;
  std::vector<Pose> gt;

  bool has_gt() const { return !gt.empty(); }
  void validate() const;  // length/extent consistency
};

struct GenConfig {
  int n_frames = 196;
  int points = 100;
  float fps = 30.0f;
  std::uint64_t seed = 1;
  std::vector<Protocol> protocols{Protocol::kWalk, Protocol::kKick};
  bool pseudo_real = false;
  float radius_jitter = 0.10f;  // relative, clamped to the legal radius range
  float scale_jitter = 0.0f;    // relative bone-length scale jitter
  int surface_oversample = 600; // raw surface samples per frame
  sensor::SensorRig rig;
  synth::OracleConfig oracle;   // bundled synthesis sample
};

/// Deterministic per-sequence generation; the stream seed is
/// config.seed + seq_index. Protocol cycles through config.protocols.
SequenceSample generate_sequence(const GenConfig& cfg, int seq_index, const Skeleton& s);

std::vector<SequenceSample> generate_dataset(const GenConfig& cfg, int count,
                                             const Skeleton& s);

/// World-frame copy of a stored cloud (undoes sensor normalization using the
/// tracked head of the same frame).
std::vector<body::Vec3f> cloud_world_points(const SequenceSample& seq, int frame);
/// Sensor origin of a frame from its tracked head.
body::Vec3f frame_sensor_origin(const SequenceSample& seq, int frame);

}  // namespace xrmbt::data
