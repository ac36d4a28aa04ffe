// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: data generation, training, evaluation, the
// ablation ladder, and viewer exports. Exit codes: 0 success, 2 config or
// input error, 3 numerical failure (training aborted on non-finite loss).
#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "xrmbt/io.hpp"
#include "xrmbt/trainer.hpp"

namespace fs = std::filesystem;
using namespace xrmbt;

namespace {

// key=value config with CLI overrides; every key must be consumed by the
// subcommand or parsing fails.
class KvConfig {
 public:
  void merge_file(const std::string& path) {
    for (const auto& [k, v] : io::load_config(path)) kv_[k] = v;
  }
  void merge_overrides(const std::vector<std::string>& sets) {
    io::apply_overrides(kv_, sets);
  }

  std::string get_str(const std::string& key, const std::string& dflt) {
    touched_.insert(key);
    const auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }
  long long get_int(const std::string& key, long long dflt) {
    const std::string s = get_str(key, "");
    if (s.empty()) return dflt;
    size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("config " + key + ": bad integer " + s);
    return v;
  }
  double get_float(const std::string& key, double dflt) {
    const std::string s = get_str(key, "");
    if (s.empty()) return dflt;
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("config " + key + ": bad number " + s);
    return v;
  }
  bool get_bool(const std::string& key, bool dflt) {
    const std::string s = get_str(key, "");
    if (s.empty()) return dflt;
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw std::invalid_argument("config " + key + ": bad bool " + s);
  }
  void finish() const {
    for (const auto& [k, v] : kv_)
      if (!touched_.count(k)) throw std::invalid_argument("unknown config key: " + k);
  }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> touched_;
};

std::uint64_t env_seed_or(std::uint64_t dflt) {
  const char* s = std::getenv("XRMBT_SEED");
  if (!s || !*s) return dflt;
  size_t pos = 0;
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != std::strlen(s)) throw std::invalid_argument("XRMBT_SEED: bad integer");
  return v;
}

std::vector<data::SequenceSample> load_dir(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".xseq") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::invalid_argument("no .xseq files in " + dir);
  std::vector<data::SequenceSample> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(io::load_sequence(f.string()));
  return out;
}

synth::OracleConfig oracle_from(KvConfig& c) {
  synth::OracleConfig o;
  o.upper_sigma = static_cast<float>(c.get_float("oracle_sigma", o.upper_sigma));
  o.lower_mode = synth::lower_mode_from_string(
      c.get_str("oracle_lower", synth::lower_mode_name(o.lower_mode)));
  o.lag_seconds = static_cast<float>(c.get_float("oracle_lag", o.lag_seconds));
  return o;
}

train::TrainConfig train_config_from(KvConfig& c) {
  train::TrainConfig t =
      c.get_bool("desk", true) ? train::TrainConfig::desk() : train::TrainConfig{};
  t.iterations = static_cast<int>(c.get_int("iterations", t.iterations));
  t.lr = static_cast<float>(c.get_float("lr", t.lr));
  t.batch_mocap = static_cast<int>(c.get_int("batch_mocap", t.batch_mocap));
  t.batch_real = static_cast<int>(c.get_int("batch_real", t.batch_real));
  t.window = static_cast<int>(c.get_int("window", t.window));
  t.mode = train::mode_from_string(c.get_str("mode", train::mode_name(t.mode)));
  t.seed = env_seed_or(static_cast<std::uint64_t>(c.get_int("seed", 1)));
  t.weights.w_rot = static_cast<float>(c.get_float("w_rot", t.weights.w_rot));
  t.weights.w_pos = static_cast<float>(c.get_float("w_pos", t.weights.w_pos));
  t.weights.w_ce = static_cast<float>(c.get_float("w_ce", t.weights.w_ce));
  t.weights.w_spc = static_cast<float>(c.get_float("w_spc", t.weights.w_spc));
  t.oracle = oracle_from(c);
  return t;
}

void fit_config_to_data(train::TrainConfig& t, const data::SequenceSample& s) {
  t.spc.P = s.P;
  t.spc.J = s.J;
  t.mpe.J = s.J;
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::map<std::string, std::string> meta_from(const train::TrainConfig& t,
                                             const train::RunArtifacts& art) {
  std::map<std::string, std::string> m = art.meta;
  m["lr"] = fmt_g(t.lr);
  m["window"] = std::to_string(t.window);
  m["batch_mocap"] = std::to_string(t.batch_mocap);
  m["batch_real"] = std::to_string(t.batch_real);
  m["w_rot"] = fmt_g(t.weights.w_rot);
  m["w_pos"] = fmt_g(t.weights.w_pos);
  m["w_ce"] = fmt_g(t.weights.w_ce);
  m["w_spc"] = fmt_g(t.weights.w_spc);
  m["spc_p"] = std::to_string(t.spc.P);
  m["spc_j"] = std::to_string(t.spc.J);
  m["mpe_hidden"] = std::to_string(t.mpe.hidden);
  return m;
}

train::TrainConfig config_from_meta(const std::map<std::string, std::string>& m) {
  train::TrainConfig t;
  const auto need = [&](const std::string& k) {
    const auto it = m.find(k);
    if (it == m.end()) throw std::invalid_argument("checkpoint meta missing key " + k);
    return it->second;
  };
  t.mode = train::mode_from_string(need("mode"));
  t.spc.P = std::stoi(need("spc_p"));
  t.spc.J = std::stoi(need("spc_j"));
  t.mpe.J = t.spc.J;
  t.mpe.hidden = std::stoi(need("mpe_hidden"));
  return t;
}

void write_artifacts(const std::string& out_dir, const train::TrainConfig& cfg,
                     const train::RunArtifacts& art) {
  fs::create_directories(out_dir);
  io::save_checkpoint(art.params, meta_from(cfg, art), out_dir + "/checkpoint.xckpt");
  io::write_text_file(out_dir + "/train_log.csv", art.log_csv());
}

void write_report(const std::string& out_dir, const metrics::MetricReport& rep) {
  fs::create_directories(out_dir);
  io::write_text_file(out_dir + "/report.txt", metrics::report_text(rep));
  io::write_text_file(out_dir + "/report.csv", metrics::report_csv(rep));
}

int run_gen(const std::string& out_dir, int count, KvConfig& c) {
  data::GenConfig g;
  g.n_frames = static_cast<int>(c.get_int("n_frames", g.n_frames));
  g.points = static_cast<int>(c.get_int("points", g.points));
  g.fps = static_cast<float>(c.get_float("fps", g.fps));
  g.seed = env_seed_or(static_cast<std::uint64_t>(c.get_int("seed", 1)));
  g.pseudo_real = c.get_bool("pseudo_real", g.pseudo_real);
  g.radius_jitter = static_cast<float>(c.get_float("radius_jitter", g.radius_jitter));
  g.scale_jitter = static_cast<float>(c.get_float("scale_jitter", g.scale_jitter));
  g.surface_oversample =
      static_cast<int>(c.get_int("surface_oversample", g.surface_oversample));
  const std::string plist = c.get_str("protocols", "walk,kick");
  g.oracle = oracle_from(c);
  c.finish();
  g.protocols.clear();
  std::istringstream is(plist);
  std::string tok;
  while (std::getline(is, tok, ','))
    if (!tok.empty()) g.protocols.push_back(body::protocol_from_string(tok));
  if (g.protocols.empty()) throw std::invalid_argument("protocols list is empty");

  const body::Skeleton s = body::default_skeleton();
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    const data::SequenceSample seq = data::generate_sequence(g, i, s);
    char name[32];
    std::snprintf(name, sizeof(name), "/seq_%04d.xseq", i);
    io::save_sequence(seq, out_dir + name);
  }
  std::cout << "wrote " << count << " sequences to " << out_dir << "\n";
  return 0;
}

int run_train(const std::string& mocap_dir, const std::string& real_dir,
              const std::string& eval_dir, const std::string& eval_real_dir,
              const std::string& out_dir, const std::string& warm_path, KvConfig& c) {
  train::TrainConfig cfg = train_config_from(c);
  c.finish();
  train::Datasets ds;
  ds.mocap = load_dir(mocap_dir);
  if (!real_dir.empty()) ds.real = load_dir(real_dir);
  if (!eval_dir.empty()) ds.eval_mocap = load_dir(eval_dir);
  if (!eval_real_dir.empty()) ds.eval_real = load_dir(eval_real_dir);
  fit_config_to_data(cfg, ds.mocap.at(0));

  const nn::ParamStore<float>* warm = nullptr;
  io::Checkpoint wc;
  if (!warm_path.empty()) {
    wc = io::load_checkpoint(warm_path);
    warm = &wc.params;
  }
  const train::RunArtifacts art = train::train(cfg, ds, warm);
  write_artifacts(out_dir, cfg, art);
  if (art.aborted) {
    std::cerr << "training aborted on non-finite loss after " << art.completed_iterations
              << " iterations; last-good checkpoint written\n";
    return 3;
  }
  std::cout << "trained " << art.completed_iterations << " iterations, mode "
            << train::mode_name(cfg.mode) << "\n";
  if (!ds.eval_mocap.empty()) {
    const metrics::MetricReport rep = train::evaluate(cfg, art.params, ds.eval_mocap);
    write_report(out_dir, rep);
    std::cout << metrics::report_text(rep);
  }
  if (!ds.eval_real.empty()) {
    const double pc = train::evaluate_pc(cfg, art.params, ds.eval_real);
    io::write_text_file(out_dir + "/pc_real.txt", "pc_loss_cm=" + fmt_g(pc * 100.0) + "\n");
    std::cout << "pseudo-real pc_loss_cm " << fmt_g(pc * 100.0) << "\n";
  }
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& real_dir, const std::string& out_dir) {
  const io::Checkpoint ck = io::load_checkpoint(ckpt_path);
  const train::TrainConfig cfg = config_from_meta(ck.meta);
  if (!data_dir.empty()) {
    const metrics::MetricReport rep = train::evaluate(cfg, ck.params, load_dir(data_dir));
    if (!out_dir.empty()) write_report(out_dir, rep);
    std::cout << metrics::report_text(rep);
  }
  if (!real_dir.empty()) {
    const double pc = train::evaluate_pc(cfg, ck.params, load_dir(real_dir));
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      io::write_text_file(out_dir + "/pc_real.txt", "pc_loss_cm=" + fmt_g(pc * 100.0) + "\n");
    }
    std::cout << "pseudo-real pc_loss_cm " << fmt_g(pc * 100.0) << "\n";
  }
  if (data_dir.empty() && real_dir.empty())
    throw std::invalid_argument("eval: provide --data and/or --real");
  return 0;
}

int run_ablate(const std::string& mocap_dir, const std::string& real_dir,
               const std::string& eval_dir, const std::string& out_dir, KvConfig& c) {
  train::TrainConfig base = train_config_from(c);
  c.finish();
  train::Datasets ds;
  ds.mocap = load_dir(mocap_dir);
  ds.real = load_dir(real_dir);
  ds.eval_mocap = load_dir(eval_dir);
  fit_config_to_data(base, ds.mocap.at(0));

  const train::LadderResult lad = train::run_ablation_ladder(base, ds);
  std::string summary = "mode,mpjpe_up_cm,mpjpe_low_cm,pc_loss_cm\n";
  for (const train::Mode m : train::all_modes()) {
    const std::string name = train::mode_name(m);
    const train::RunArtifacts& art = lad.runs.at(name);
    const metrics::MetricReport& rep = lad.reports.at(name);
    train::TrainConfig cfg = base;
    cfg.mode = m;
    write_artifacts(out_dir + "/" + name, cfg, art);
    write_report(out_dir + "/" + name, rep);
    if (art.aborted) {
      std::cerr << "mode " << name << " aborted on non-finite loss\n";
      return 3;
    }
    summary += name + "," + fmt_g(rep.overall.mpjpe_up) + "," + fmt_g(rep.overall.mpjpe_low) +
               "," + fmt_g(rep.overall.pc_loss_cm) + "\n";
  }
  io::write_text_file(out_dir + "/summary.csv", summary);
  std::cout << summary;
  return 0;
}

int run_export_ply(const std::string& seq_path, int frame, const std::string& out,
                   bool world) {
  const data::SequenceSample seq = io::load_sequence(seq_path);
  if (frame < 0 || frame >= seq.N) throw std::invalid_argument("frame out of range");
  std::vector<body::Vec3f> pts =
      world ? data::cloud_world_points(seq, frame) : seq.clouds[frame].points;
  std::vector<int> labels = seq.clouds[frame].label;
  if (labels.empty()) labels.assign(pts.size(), seq.J);  // unlabeled: background
  io::export_ply(pts, labels, out);
  std::cout << "wrote " << pts.size() << " points to " << out << "\n";
  return 0;
}

int run_export_pose(const std::string& seq_path, const std::string& which,
                    const std::string& out) {
  const data::SequenceSample seq = io::load_sequence(seq_path);
  const std::vector<body::Pose>* poses = nullptr;
  if (which == "synth")
    poses = &seq.synth;
  else if (which == "gt")
    poses = &seq.gt;
  else
    throw std::invalid_argument("export-pose --which must be synth or gt");
  if (poses->empty()) throw std::invalid_argument("sequence has no " + which + " poses");

  std::string csv = "frame,root_px,root_py,root_pz";
  for (int k = 0; k < 6; ++k) csv += ",root_r" + std::to_string(k);
  for (int j = 0; j < seq.J; ++j)
    for (int k = 0; k < 6; ++k) csv += ",j" + std::to_string(j) + "_r" + std::to_string(k);
  csv += "\n";
  for (int t = 0; t < seq.N; ++t) {
    const body::Pose& p = (*poses)[t];
    csv += std::to_string(t) + "," + fmt_g(p.root_pos.x) + "," + fmt_g(p.root_pos.y) + "," +
           fmt_g(p.root_pos.z);
    for (int k = 0; k < 6; ++k) csv += "," + fmt_g(p.root_rot.v[k]);
    for (int j = 0; j < seq.J; ++j)
      for (int k = 0; k < 6; ++k) csv += "," + fmt_g(p.local_rot[j].v[k]);
    csv += "\n";
  }
  io::write_text_file(out, csv);
  std::cout << "wrote " << seq.N << " poses to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"egocentric point-cloud body tracking pipeline"};
  app.require_subcommand(1);
  int rc = 0;

  std::string cfg_path;
  std::vector<std::string> sets;
  const auto add_cfg = [&](CLI::App* sc) {
    sc->add_option("--config", cfg_path, "key=value config file");
    sc->add_option("--set", sets, "config override key=value (repeatable)");
  };
  const auto make_kv = [&]() {
    KvConfig c;
    if (!cfg_path.empty()) c.merge_file(cfg_path);
    c.merge_overrides(sets);
    return c;
  };

  std::string out_dir, mocap_dir, real_dir, eval_dir, eval_real_dir, warm_path;
  std::string seq_path, which = "synth", ckpt_path;
  int count = 8, frame = 0;
  bool world = false;

  auto* gen = app.add_subcommand("gen-data", "generate simulated sequences");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--count", count, "number of sequences")->required();
  add_cfg(gen);
  gen->callback([&]() {
    KvConfig c = make_kv();
    rc = run_gen(out_dir, count, c);
  });

  auto* tr = app.add_subcommand("train", "train registration + refinement");
  tr->add_option("--mocap", mocap_dir, "mocap-synthetic training directory")->required();
  tr->add_option("--real", real_dir, "pseudo-real training directory");
  tr->add_option("--eval", eval_dir, "held-out mocap evaluation directory");
  tr->add_option("--eval-real", eval_real_dir, "held-out pseudo-real directory");
  tr->add_option("--out", out_dir, "artifact directory")->required();
  tr->add_option("--warm-start", warm_path, "checkpoint to fine-tune from");
  add_cfg(tr);
  tr->callback([&]() {
    KvConfig c = make_kv();
    rc = run_train(mocap_dir, real_dir, eval_dir, eval_real_dir, out_dir, warm_path, c);
  });

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  ev->add_option("--data", eval_dir, "evaluation directory (with gt)");
  ev->add_option("--real", eval_real_dir, "pseudo-real directory (pc only)");
  ev->add_option("--out", out_dir, "report directory");
  ev->callback([&]() { rc = run_eval(ckpt_path, eval_dir, eval_real_dir, out_dir); });

  auto* ab = app.add_subcommand("ablate", "train and evaluate every ablation mode");
  ab->add_option("--mocap", mocap_dir, "mocap-synthetic training directory")->required();
  ab->add_option("--real", real_dir, "pseudo-real training directory")->required();
  ab->add_option("--eval", eval_dir, "held-out evaluation directory")->required();
  ab->add_option("--out", out_dir, "artifact directory")->required();
  add_cfg(ab);
  ab->callback([&]() {
    KvConfig c = make_kv();
    rc = run_ablate(mocap_dir, real_dir, eval_dir, out_dir, c);
  });

  auto* ep = app.add_subcommand("export-ply", "dump one frame's cloud as ASCII PLY");
  ep->add_option("--seq", seq_path, "sequence file")->required();
  ep->add_option("--frame", frame, "frame index")->required();
  ep->add_option("--out", out_dir, "output .ply path")->required();
  ep->add_flag("--world", world, "emit world-frame coordinates");
  ep->callback([&]() { rc = run_export_ply(seq_path, frame, out_dir, world); });

  auto* px = app.add_subcommand("export-pose", "dump a pose track as CSV");
  px->add_option("--seq", seq_path, "sequence file")->required();
  px->add_option("--which", which, "synth or gt");
  px->add_option("--out", out_dir, "output .csv path")->required();
  px->callback([&]() { rc = run_export_pose(seq_path, which, out_dir); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
