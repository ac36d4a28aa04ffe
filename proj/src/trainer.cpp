// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/trainer.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <stdexcept>

#include "xrmbt/adam.hpp"
#include "xrmbt/fk.hpp"
#include "xrmbt/rng.hpp"

namespace xrmbt::train {

namespace {

using body::BodyShape;
using body::Pose;
using body::Skeleton;
using body::Vec3f;

std::mt19937 seeded(std::uint64_t seed) {
  return std::mt19937(static_cast<std::uint32_t>(seed ^ (seed >> 32)));
}

// One stacked batch of contiguous windows, frame-major.
struct Stack {
  ad::Tensor<float> x;         // [B,54]
  ad::Tensor<float> points;    // [B*P,3] sensor-normalized
  ad::Tensor<float> y6;        // [B,J*6] synthesis rotations
  ad::Tensor<float> root_pos;  // [B,3]
  ad::Tensor<float> root_rot;  // [B,9]
  ad::Tensor<float> gt6;       // mocap only
  ad::Tensor<float> gt_pos;    // mocap only, [B,J*3]
  std::vector<int> labels;     // mocap only, flattened B*P
  std::vector<std::vector<Vec3f>> world;  // per frame, world-frame cloud
  int frames = 0;
};

void check_set(const std::vector<data::SequenceSample>& set, const TrainConfig& cfg,
               int window, const char* what) {
  if (set.empty()) throw std::invalid_argument(std::string("train: ") + what + " set is empty");
  for (const auto& seq : set) {
    if (seq.J != cfg.spc.J || seq.P != cfg.spc.P)
      throw std::invalid_argument(std::string("train: ") + what +
                                  " sequence extents do not match the config");
    if (seq.N < window)
      throw std::invalid_argument(std::string("train: ") + what +
                                  " sequence shorter than a window");
  }
}

Stack sample_stack(const std::vector<data::SequenceSample>& set, int n_frames, int window,
                   const Skeleton& s, const TrainConfig& cfg, bool mocap, std::mt19937& rng) {
  const int P = cfg.spc.P;
  const int J = cfg.spc.J;
  const int n_win = n_frames / window;
  Stack st;
  st.frames = n_frames;
  st.x = ad::Tensor<float>::zeros({n_frames, 54});
  st.points = ad::Tensor<float>::zeros({n_frames * P, 3});
  st.y6 = ad::Tensor<float>::zeros({n_frames, J * 6});
  st.root_pos = ad::Tensor<float>::zeros({n_frames, 3});
  st.root_rot = ad::Tensor<float>::zeros({n_frames, 9});
  if (mocap) {
    st.gt6 = ad::Tensor<float>::zeros({n_frames, J * 6});
    st.gt_pos = ad::Tensor<float>::zeros({n_frames, J * 3});
    st.labels.resize(static_cast<size_t>(n_frames) * P);
  }
  st.world.resize(n_frames);

  for (int w = 0; w < n_win; ++w) {
    const auto& seq = set[rngu::uniform_int(rng, 0, static_cast<int>(set.size()) - 1)];
    const int start = rngu::uniform_int(rng, 0, seq.N - window);
    // Fresh synthesis draw per batch for mocap; pseudo-real has no gt to
    // resample from and keeps its bundled sample.
    std::vector<Pose> ys;
    if (mocap) ys = synth::noisy_oracle(seq.x, seq.gt, s, cfg.oracle, rng);

    for (int k = 0; k < window; ++k) {
      const int t = start + k;
      const int r = w * window + k;
      const auto xf = seq.x[t].flat();
      for (int i = 0; i < 54; ++i) st.x.at(r, i) = xf[i];
      for (int i = 0; i < P; ++i) {
        st.points.at(r * P + i, 0) = seq.clouds[t].points[i].x;
        st.points.at(r * P + i, 1) = seq.clouds[t].points[i].y;
        st.points.at(r * P + i, 2) = seq.clouds[t].points[i].z;
      }
      st.world[r] = data::cloud_world_points(seq, t);
      const Pose& y = mocap ? ys[t] : seq.synth[t];
      for (int j = 0; j < J; ++j)
        for (int i = 0; i < 6; ++i) st.y6.at(r, 6 * j + i) = y.local_rot[j].v[i];
      st.root_pos.at(r, 0) = y.root_pos.x;
      st.root_pos.at(r, 1) = y.root_pos.y;
      st.root_pos.at(r, 2) = y.root_pos.z;
      const auto m = geom::rot6d_to_matrix(y.root_rot);
      for (int i = 0; i < 9; ++i) st.root_rot.at(r, i) = m.m[i];
      if (mocap) {
        const Pose& gt = seq.gt[t];
        for (int j = 0; j < J; ++j)
          for (int i = 0; i < 6; ++i) st.gt6.at(r, 6 * j + i) = gt.local_rot[j].v[i];
        const body::FkResult f = body::fk(s, gt);
        for (int j = 0; j < J; ++j) {
          st.gt_pos.at(r, 3 * j + 0) = f.pos[j].x;
          st.gt_pos.at(r, 3 * j + 1) = f.pos[j].y;
          st.gt_pos.at(r, 3 * j + 2) = f.pos[j].z;
        }
        for (int i = 0; i < P; ++i)
          st.labels[static_cast<size_t>(r) * P + i] = seq.clouds[t].label[i];
      }
    }
  }
  return st;
}

struct BuiltStack {
  net::SpcNodes<float> nodes;
  ad::NodeId x = -1;
  ad::NodeId z = -1;
  ad::NodeId pos = -1;  // FK positions [B,J*3], world frame
};

BuiltStack build_stack(ad::Graph<float>& g, const TrainConfig& cfg,
                       const nn::ParamStore<float>& ps, const std::vector<ad::NodeId>& bound,
                       const Skeleton& s, const Stack& st, bool with_decoder) {
  BuiltStack b;
  b.x = g.constant(st.x);
  b.nodes = net::spc_encode(g, cfg.spc, ps, bound, g.constant(st.points), b.x, cfg.window);
  if (with_decoder) net::spc_decode(g, cfg.spc, ps, bound, b.x, b.nodes);
  b.z = net::mpe_refine(g, cfg.mpe, ps, bound, b.x, g.constant(st.y6), b.nodes.global);
  b.pos = body::graph::fk_positions(g, s, 1.0f, b.z, g.constant(st.root_pos),
                                    g.constant(st.root_rot));
  return b;
}

struct EvidenceBatch {
  ad::Tensor<float> support;  // [B,J]
  ad::Tensor<float> cen;      // [B,J*3]
};

// Detached evidence: read the registration values and treat support/centroids
// as constants of this step.
EvidenceBatch batch_evidence(const ad::Tensor<float>& probs,
                             const std::vector<std::vector<Vec3f>>& world, int P, int J) {
  const int B = static_cast<int>(world.size());
  EvidenceBatch e{ad::Tensor<float>::zeros({B, J}), ad::Tensor<float>::zeros({B, J * 3})};
  ad::Tensor<float> frame = ad::Tensor<float>::zeros({P, J + 1});
  for (int b = 0; b < B; ++b) {
    for (int i = 0; i < P; ++i)
      for (int c = 0; c <= J; ++c) frame.at(i, c) = probs.at(b * P + i, c);
    const loss::JointEvidence ev = loss::joint_evidence(world[b], frame, J);
    for (int j = 0; j < J; ++j) {
      e.support.at(b, j) = static_cast<float>(ev.support[j]);
      e.cen.at(b, 3 * j + 0) = static_cast<float>(ev.centroid[j].x);
      e.cen.at(b, 3 * j + 1) = static_cast<float>(ev.centroid[j].y);
      e.cen.at(b, 3 * j + 2) = static_cast<float>(ev.centroid[j].z);
    }
  }
  return e;
}

ad::Tensor<float> flat_points(const std::vector<std::vector<Vec3f>>& world) {
  const int B = static_cast<int>(world.size());
  const int P = static_cast<int>(world[0].size());
  ad::Tensor<float> t = ad::Tensor<float>::zeros({B * P, 3});
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < P; ++i) {
      t.at(b * P + i, 0) = world[b][i].x;
      t.at(b * P + i, 1) = world[b][i].y;
      t.at(b * P + i, 2) = world[b][i].z;
    }
  return t;
}

ad::Tensor<float> slice_rows(const ad::Tensor<float>& t, int begin, int end) {
  ad::Tensor<float> out = ad::Tensor<float>::zeros({end - begin, t.cols()});
  for (int r = begin; r < end; ++r)
    for (int c = 0; c < t.cols(); ++c) out.at(r - begin, c) = t.at(r, c);
  return out;
}

ad::Tensor<float> vstack(const ad::Tensor<float>& a, const ad::Tensor<float>& b) {
  ad::Tensor<float> out = ad::Tensor<float>::zeros({a.rows() + b.rows(), a.cols()});
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) out.at(r, c) = a.at(r, c);
  for (int r = 0; r < b.rows(); ++r)
    for (int c = 0; c < b.cols(); ++c) out.at(a.rows() + r, c) = b.at(r, c);
  return out;
}

}  // namespace

Mode mode_from_string(const std::string& s) {
  if (s == "synthesis_only") return Mode::kSynthesisOnly;
  if (s == "mpe") return Mode::kMpe;
  if (s == "mpe_spc_decoder") return Mode::kMpeSpcDecoder;
  if (s == "mpe_spc_decoder_pcloss") return Mode::kMpeSpcDecoderPcLoss;
  if (s == "mpe_spc_decoder_spcloss") return Mode::kMpeSpcDecoderSpcLoss;
  throw std::invalid_argument("unknown ablation mode: " + s);
}

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kSynthesisOnly: return "synthesis_only";
    case Mode::kMpe: return "mpe";
    case Mode::kMpeSpcDecoder: return "mpe_spc_decoder";
    case Mode::kMpeSpcDecoderPcLoss: return "mpe_spc_decoder_pcloss";
    case Mode::kMpeSpcDecoderSpcLoss: return "mpe_spc_decoder_spcloss";
  }
  throw std::invalid_argument("unknown ablation mode");
}

bool mode_has_mpe(Mode m) { return m != Mode::kSynthesisOnly; }

bool mode_has_decoder(Mode m) {
  return m == Mode::kMpeSpcDecoder || m == Mode::kMpeSpcDecoderPcLoss ||
         m == Mode::kMpeSpcDecoderSpcLoss;
}

bool mode_uses_real(Mode m) {
  return m == Mode::kMpeSpcDecoderPcLoss || m == Mode::kMpeSpcDecoderSpcLoss;
}

const std::vector<Mode>& all_modes() {
  static const std::vector<Mode> modes{Mode::kSynthesisOnly, Mode::kMpe, Mode::kMpeSpcDecoder,
                                       Mode::kMpeSpcDecoderPcLoss, Mode::kMpeSpcDecoderSpcLoss};
  return modes;
}

void TrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("TrainConfig: iterations must be >= 0");
  if (!(lr > 0.0f)) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (window <= 0 || batch_mocap <= 0 || batch_mocap % window != 0)
    throw std::invalid_argument("TrainConfig: batch_mocap must be a positive multiple of window");
  if (mode_uses_real(mode) && (batch_real <= 0 || batch_real % window != 0))
    throw std::invalid_argument("TrainConfig: batch_real must be a positive multiple of window");
  if (spc.J != mpe.J || spc.x_dim != mpe.x_dim || spc.enc_h2 != mpe.f_dim)
    throw std::invalid_argument("TrainConfig: spc/mpe widths disagree");
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.iterations = 2000;
  c.batch_mocap = 16;
  c.batch_real = 8;
  c.window = 8;
  return c;
}

std::string RunArtifacts::log_csv() const {
  std::string out;
  for (const auto& row : log) {
    out += row;
    out += '\n';
  }
  return out;
}

nn::ParamStore<float> init_params(const TrainConfig& cfg) {
  nn::ParamStore<float> ps;
  if (cfg.mode == Mode::kSynthesisOnly) return ps;
  std::mt19937 rng = seeded(cfg.seed);
  if (mode_has_decoder(cfg.mode))
    net::spc_init(ps, cfg.spc, rng);
  else
    net::spc_init_encoder(ps, cfg.spc, rng);
  net::mpe_init(ps, cfg.mpe, rng);
  return ps;
}

RunArtifacts train(const TrainConfig& cfg, const Datasets& ds,
                   const nn::ParamStore<float>* warm_start) {
  cfg.validate();
  RunArtifacts art;
  art.meta["mode"] = mode_name(cfg.mode);
  art.meta["seed"] = std::to_string(cfg.seed);
  art.meta["aborted"] = "0";
  art.log.push_back("step,l_rot,l_pos,l_ce,l_spc,total");
  if (cfg.mode == Mode::kSynthesisOnly) return art;

  check_set(ds.mocap, cfg, cfg.window, "mocap");
  if (mode_uses_real(cfg.mode)) check_set(ds.real, cfg, cfg.window, "pseudo-real");

  const Skeleton s = body::default_skeleton();
  const BodyShape shape = body::default_shape();
  const auto caps = body::body_capsules(s, shape);
  std::vector<int> cap_pairs;
  std::vector<float> cap_radii;
  for (const auto& c : caps) {
    cap_pairs.push_back(c.ja);
    cap_pairs.push_back(c.jb);
    cap_radii.push_back(c.radius);
  }

  art.params = warm_start ? *warm_start : init_params(cfg);
  opt::Adam<float> adam;
  adam.lr = cfg.lr;
  adam.init(art.params);
  std::mt19937 rng = seeded(cfg.seed + 0x9e3779b9u);
  nn::ParamStore<float> last_good = art.params;
  const loss::LossWeights& W = cfg.weights;

  for (int it = 0; it < cfg.iterations; ++it) {
    const Stack sm =
        sample_stack(ds.mocap, cfg.batch_mocap, cfg.window, s, cfg, /*mocap=*/true, rng);
    Stack sr;
    if (mode_uses_real(cfg.mode))
      sr = sample_stack(ds.real, cfg.batch_real, cfg.window, s, cfg, /*mocap=*/false, rng);

    ad::Graph<float> g;
    const auto bound = nn::bind_params(g, art.params);
    const bool real_decoder = cfg.mode == Mode::kMpeSpcDecoderSpcLoss;
    const BuiltStack bm = build_stack(g, cfg, art.params, bound, s, sm,
                                      mode_has_decoder(cfg.mode));
    const ad::NodeId rot = loss::graph::rot_mse(g, bm.z, g.constant(sm.gt6));
    const ad::NodeId pos = loss::graph::pos_mse(g, bm.pos, g.constant(sm.gt_pos));
    ad::NodeId total = g.add(g.scale(rot, W.w_rot), g.scale(pos, W.w_pos));
    ad::NodeId ce = -1;
    if (mode_has_decoder(cfg.mode)) {
      ce = g.nll_mean_rows(bm.nodes.probs, sm.labels);
      total = g.add(total, g.scale(ce, W.w_ce));
    }
    ad::NodeId spc_term = -1;
    if (cfg.mode == Mode::kMpeSpcDecoderSpcLoss) {
      const BuiltStack br = build_stack(g, cfg, art.params, bound, s, sr, real_decoder);
      const EvidenceBatch em =
          batch_evidence(g.val(bm.nodes.probs), sm.world, cfg.spc.P, cfg.spc.J);
      const EvidenceBatch er =
          batch_evidence(g.val(br.nodes.probs), sr.world, cfg.spc.P, cfg.spc.J);
      // One active-set normalization across both domains, so the term is the
      // combined average over nonempty frames.
      const ad::Tensor<float> w_all =
          loss::spc_weights(vstack(em.support, er.support), cfg.spc.P);
      const ad::Tensor<float> w_m = slice_rows(w_all, 0, sm.frames);
      const ad::Tensor<float> w_r = slice_rows(w_all, sm.frames, sm.frames + sr.frames);
      const ad::NodeId hm =
          loss::graph::spc_hinge(g, bm.pos, g.constant(em.cen), w_m, loss::kSpcTheta);
      const ad::NodeId hr =
          loss::graph::spc_hinge(g, br.pos, g.constant(er.cen), w_r, loss::kSpcTheta);
      spc_term = g.add(hm, hr);
      total = g.add(total, g.scale(spc_term, W.w_spc));
    } else if (cfg.mode == Mode::kMpeSpcDecoderPcLoss) {
      const BuiltStack br = build_stack(g, cfg, art.params, bound, s, sr, real_decoder);
      const ad::NodeId pm =
          g.pc_surface_loss(bm.pos, flat_points(sm.world), cap_pairs, cap_radii, cfg.spc.P);
      const ad::NodeId pr =
          g.pc_surface_loss(br.pos, flat_points(sr.world), cap_pairs, cap_radii, cfg.spc.P);
      const float fm = static_cast<float>(sm.frames) / (sm.frames + sr.frames);
      spc_term = g.add(g.scale(pm, fm), g.scale(pr, 1.0f - fm));
      total = g.add(total, g.scale(spc_term, W.w_spc));
    }

    const double l_rot = g.val(rot).data[0];
    const double l_pos = g.val(pos).data[0];
    const double l_ce = ce >= 0 ? g.val(ce).data[0] : 0.0;
    const double l_spc = spc_term >= 0 ? g.val(spc_term).data[0] : 0.0;
    const double l_total = g.val(total).data[0];
    if (!std::isfinite(l_rot) || !std::isfinite(l_pos) || !std::isfinite(l_ce) ||
        !std::isfinite(l_spc) || !std::isfinite(l_total)) {
      art.aborted = true;
      art.meta["aborted"] = "1";
      art.params = last_good;
      break;
    }
    last_good = art.params;

    g.backward(total);
    std::vector<ad::Tensor<float>> grads;
    grads.reserve(bound.size());
    for (const ad::NodeId id : bound) grads.push_back(g.grad(id));
    adam.step(art.params, grads);

    char row[192];
    std::snprintf(row, sizeof(row), "%d,%.9g,%.9g,%.9g,%.9g,%.9g", it, l_rot, l_pos, l_ce,
                  l_spc, l_total);
    art.log.push_back(row);
    art.completed_iterations = it + 1;
  }
  art.meta["completed"] = std::to_string(art.completed_iterations);
  return art;
}

std::vector<Pose> predict_sequence(const TrainConfig& cfg, const nn::ParamStore<float>& params,
                                   const data::SequenceSample& seq) {
  if (cfg.mode == Mode::kSynthesisOnly) return seq.synth;
  if (seq.J != cfg.spc.J || seq.P != cfg.spc.P)
    throw std::invalid_argument("predict_sequence: sequence extents do not match the config");
  if (params.find("mpe.out.w") < 0)
    throw std::invalid_argument("predict_sequence: refinement parameters missing");

  ad::Graph<float> g;
  const auto bound = nn::bind_params(g, params);
  ad::Tensor<float> x = ad::Tensor<float>::zeros({seq.N, 54});
  for (int t = 0; t < seq.N; ++t) {
    const auto xf = seq.x[t].flat();
    for (int i = 0; i < 54; ++i) x.at(t, i) = xf[i];
  }
  ad::Tensor<float> pts = ad::Tensor<float>::zeros({seq.N * seq.P, 3});
  for (int t = 0; t < seq.N; ++t)
    for (int i = 0; i < seq.P; ++i) {
      pts.at(t * seq.P + i, 0) = seq.clouds[t].points[i].x;
      pts.at(t * seq.P + i, 1) = seq.clouds[t].points[i].y;
      pts.at(t * seq.P + i, 2) = seq.clouds[t].points[i].z;
    }
  const ad::NodeId xs = g.constant(std::move(x));
  const auto nodes =
      net::spc_encode(g, cfg.spc, params, bound, g.constant(std::move(pts)), xs, seq.N);
  const ad::NodeId y = g.constant(body::poses_to_rot6_rows(seq.synth));
  const ad::NodeId z = net::mpe_refine(g, cfg.mpe, params, bound, xs, y, nodes.global);

  const ad::Tensor<float>& zv = g.val(z);
  std::vector<Pose> out = seq.synth;  // keeps roots bitwise
  for (int t = 0; t < seq.N; ++t)
    for (int j = 0; j < seq.J; ++j)
      for (int k = 0; k < 6; ++k) out[t].local_rot[j].v[k] = zv.at(t, 6 * j + k);
  return out;
}

metrics::MetricReport evaluate(const TrainConfig& cfg, const nn::ParamStore<float>& params,
                               const std::vector<data::SequenceSample>& eval_set) {
  if (eval_set.empty()) throw std::invalid_argument("evaluate: empty evaluation set");
  const Skeleton s = body::default_skeleton();
  const BodyShape shape = body::default_shape();
  metrics::RowAccum overall;
  std::map<std::string, metrics::RowAccum> per_action;
  for (const auto& seq : eval_set) {
    if (seq.J != s.J) throw std::invalid_argument("evaluate: skeleton mismatch");
    if (!seq.has_gt()) throw std::invalid_argument("evaluate: sequence lacks ground truth");
    const std::vector<Pose> pred = predict_sequence(cfg, params, seq);
    overall.add_sequence(s, pred, seq.gt, seq.fps);
    auto& pa = per_action[seq.protocol];
    pa.add_sequence(s, pred, seq.gt, seq.fps);
    std::vector<std::vector<Vec3f>> world(seq.N);
    for (int t = 0; t < seq.N; ++t) world[t] = data::cloud_world_points(seq, t);
    const double m = loss::pc_loss(s, shape, world, pred);
    const long long n = static_cast<long long>(seq.N) * seq.P;
    overall.pc.sum += m * n;
    overall.pc.n += n;
    pa.pc.sum += m * n;
    pa.pc.n += n;
  }
  metrics::MetricReport r;
  r.overall = overall.finalize();
  for (const auto& [name, acc] : per_action) r.per_action[name] = acc.finalize();
  return r;
}

double evaluate_pc(const TrainConfig& cfg, const nn::ParamStore<float>& params,
                   const std::vector<data::SequenceSample>& eval_set) {
  if (eval_set.empty()) throw std::invalid_argument("evaluate_pc: empty evaluation set");
  const Skeleton s = body::default_skeleton();
  const BodyShape shape = body::default_shape();
  metrics::Accum acc;
  for (const auto& seq : eval_set) {
    if (seq.J != s.J) throw std::invalid_argument("evaluate_pc: skeleton mismatch");
    const std::vector<Pose> pred = predict_sequence(cfg, params, seq);
    std::vector<std::vector<Vec3f>> world(seq.N);
    for (int t = 0; t < seq.N; ++t) world[t] = data::cloud_world_points(seq, t);
    const double m = loss::pc_loss(s, shape, world, pred);
    const long long n = static_cast<long long>(seq.N) * seq.P;
    acc.sum += m * n;
    acc.n += n;
  }
  return acc.mean();
}

LadderResult run_ablation_ladder(const TrainConfig& base, const Datasets& ds) {
  LadderResult out;
  for (const Mode m : all_modes()) {
    TrainConfig cfg = base;
    cfg.mode = m;
    RunArtifacts art = train(cfg, ds);
    out.reports[mode_name(m)] = evaluate(cfg, art.params, ds.eval_mocap);
    out.runs[mode_name(m)] = std::move(art);
  }
  return out;
}

std::uint32_t params_checksum(const nn::ParamStore<float>& ps) {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& e : ps.entries) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(e.name.data()),
                static_cast<uInt>(e.name.size()));
    for (const int d : e.value.shape) {
      const auto u = static_cast<std::uint32_t>(d);
      unsigned char b[4] = {static_cast<unsigned char>(u & 0xff),
                            static_cast<unsigned char>((u >> 8) & 0xff),
                            static_cast<unsigned char>((u >> 16) & 0xff),
                            static_cast<unsigned char>((u >> 24) & 0xff)};
      crc = crc32(crc, b, 4);
    }
    for (const float v : e.value.data) {
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      unsigned char b[4] = {static_cast<unsigned char>(u & 0xff),
                            static_cast<unsigned char>((u >> 8) & 0xff),
                            static_cast<unsigned char>((u >> 16) & 0xff),
                            static_cast<unsigned char>((u >> 24) & 0xff)};
      crc = crc32(crc, b, 4);
    }
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace xrmbt::train
