// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <stdexcept>

#include "xrmbt/rng.hpp"
#include "xrmbt/sequence.hpp"

namespace xrmbt::data {

using body::BodyShape;
using body::FkResult;
using body::Mat3f;
using body::Vec3f;

void SequenceSample::validate() const {
  if (N <= 0 || P <= 0 || J <= 0) throw std::invalid_argument("sequence: bad extents");
  if (static_cast<int>(x.size()) != N || static_cast<int>(clouds.size()) != N ||
      static_cast<int>(synth.size()) != N)
    throw std::invalid_argument("sequence: array lengths do not match N");
  if (!gt.empty() && static_cast<int>(gt.size()) != N)
    throw std::invalid_argument("sequence: gt length does not match N");
  const bool labeled = !clouds.empty() && !clouds[0].label.empty();
  for (const auto& c : clouds) {
    if (static_cast<int>(c.points.size()) != P)
      throw std::invalid_argument("sequence: cloud size does not match P");
    if (c.label.empty() == labeled)
      throw std::invalid_argument("sequence: labels must be present on all frames or none");
    if (!c.label.empty() && c.label.size() != c.points.size())
      throw std::invalid_argument("sequence: label size does not match P");
  }
  for (const auto& p : synth)
    if (static_cast<int>(p.local_rot.size()) != J)
      throw std::invalid_argument("sequence: pose width does not match J");
}

Vec3f frame_sensor_origin(const SequenceSample& seq, int frame) {
  const auto& head = seq.x.at(frame).head;
  Vec3f origin, vdir;
  sensor::sensor_frame(seq.rig, head.pos, geom::rot6d_to_matrix(head.rot), origin, vdir);
  return origin;
}

std::vector<Vec3f> cloud_world_points(const SequenceSample& seq, int frame) {
  const Vec3f origin = frame_sensor_origin(seq, frame);
  std::vector<Vec3f> out = seq.clouds.at(frame).points;
  for (Vec3f& p : out) p += origin;
  return out;
}

SequenceSample generate_sequence(const GenConfig& cfg, int seq_index, const Skeleton& s) {
  if (cfg.protocols.empty()) throw std::invalid_argument("generate_sequence: no protocols");
  cfg.rig.validate();
  std::mt19937 rng(static_cast<std::uint32_t>(cfg.seed + static_cast<std::uint64_t>(seq_index)));

  SequenceSample seq;
  seq.N = cfg.n_frames;
  seq.P = cfg.points;
  seq.J = s.J;
  seq.fps = cfg.fps;
  seq.rig = cfg.rig;
  seq.domain_tag = cfg.pseudo_real ? kDomainPseudoReal : kDomainMocap;
  const Protocol proto = cfg.protocols[seq_index % cfg.protocols.size()];
  seq.protocol = body::protocol_name(proto);

  // per-sequence body shape
  BodyShape shape = body::default_shape();
  for (int j = 1; j < s.J; ++j) {
    const float f = 1.0f + static_cast<float>(cfg.radius_jitter * rngu::uniform(rng, -1.0, 1.0));
    shape.radius[j] = std::clamp(shape.radius[j] * f, 0.02f, 0.20f);
  }
  shape.scale = std::clamp(
      1.0f + static_cast<float>(cfg.scale_jitter * rngu::uniform(rng, -1.0, 1.0)), 0.85f, 1.15f);
  shape.validate(s.J);

  body::MotionSequence motion = body::gen_motion(proto, cfg.n_frames, cfg.fps, s, shape.scale, rng);
  seq.x = std::move(motion.x);
  seq.gt = std::move(motion.gt);

  seq.clouds.reserve(cfg.n_frames);
  for (int t = 0; t < cfg.n_frames; ++t) {
    const FkResult f = body::fk(s, seq.gt[t], shape.scale);
    const std::vector<sensor::PosedCapsule> caps = sensor::pose_capsules(s, shape, f);
    Vec3f origin, vdir;
    sensor::sensor_frame(cfg.rig, f.pos[body::kHead], f.world_rot[body::kHead], origin, vdir);

    // the capsule the sensor is mounted on cannot occlude its own rays
    std::vector<sensor::PosedCapsule> occluders;
    occluders.reserve(caps.size() - 1);
    for (int j = 1; j < s.J; ++j)
      if (j != body::kHead) occluders.push_back(caps[j - 1]);

    const std::vector<Vec3f> raw = sensor::surface_sample(s, seq.gt[t], shape,
                                                          cfg.surface_oversample, rng);
    const std::vector<Vec3f> vis =
        sensor::visible_points(raw, origin, vdir, cfg.rig, occluders);
    std::vector<int> chosen;
    std::vector<Vec3f> pts =
        sensor::depth_weighted_sample(vis, origin, vdir, cfg.rig, cfg.points, rng, &chosen);

    sensor::SampledCloud cloud;
    if (vis.empty()) {
      cloud.points = std::move(pts);
      cloud.label.assign(cfg.points, s.J);  // all background sentinels
    } else {
      // label on the un-noised world points, then corrupt
      std::vector<Vec3f> world(cfg.points);
      for (int k = 0; k < cfg.points; ++k) world[k] = vis[chosen[k]];
      cloud.label = sensor::label_points(world, f.pos);
      sensor::corrupt(world, rng);
      cloud.points.resize(cfg.points);
      for (int k = 0; k < cfg.points; ++k) cloud.points[k] = world[k] - origin;
    }
    if (cfg.pseudo_real) sensor::domain_shift(cloud, vdir, rng);
    seq.clouds.push_back(std::move(cloud));
  }

  // bundled synthesis draw (the fixed evaluation sample)
  synth::OracleConfig oc = cfg.oracle;
  oc.fps = cfg.fps;
  seq.synth = synth::noisy_oracle(seq.x, seq.gt, s, oc, rng);

  if (cfg.pseudo_real) {
    seq.gt.clear();
    for (auto& c : seq.clouds) c.label.clear();
  }
  seq.validate();
  return seq;
}

std::vector<SequenceSample> generate_dataset(const GenConfig& cfg, int count,
                                             const Skeleton& s) {
  std::vector<SequenceSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(generate_sequence(cfg, i, s));
  return out;
}

}  // namespace xrmbt::data
