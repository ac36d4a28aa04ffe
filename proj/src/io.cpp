// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/io.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace xrmbt::io {

namespace {

void put_f32(std::string& out, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  out.push_back(static_cast<char>(u & 0xff));
  out.push_back(static_cast<char>((u >> 8) & 0xff));
  out.push_back(static_cast<char>((u >> 16) & 0xff));
  out.push_back(static_cast<char>((u >> 24) & 0xff));
}

float get_f32(const unsigned char* p) {
  const uint32_t u = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                     (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

uint32_t payload_crc(const std::string& payload) {
  return static_cast<uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(payload.data()),
            static_cast<uInt>(payload.size())));
}

std::string fmt_hexfloat(float v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", static_cast<double>(v));
  return buf;
}

float parse_f(const std::string& s) {
  char* end = nullptr;
  const float v = std::strtof(s.c_str(), &end);
  if (end == s.c_str()) throw std::runtime_error("bad float in manifest: " + s);
  return v;
}

long parse_i(const std::string& s) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw std::runtime_error("bad integer in manifest: " + s);
  return v;
}

std::vector<float> parse_f_list(const std::string& s, size_t want) {
  std::istringstream is(s);
  std::vector<float> out;
  std::string tok;
  while (is >> tok) out.push_back(parse_f(tok));
  if (out.size() != want) throw std::runtime_error("wrong count in manifest list: " + s);
  return out;
}

using KvLines = std::vector<std::pair<std::string, std::string>>;

KvLines parse_kv_lines(const std::string& text) {
  KvLines out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::runtime_error("malformed manifest line: " + line);
    out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return out;
}

// Splits a manifest+payload file at the first "---\n" separator.
struct RawFile {
  std::string header;
  std::string payload;
};

RawFile read_split(const std::string& path) {
  const std::string all = read_text_file(path);
  const std::string sep = "\n---\n";
  const size_t at = all.find(sep);
  if (at == std::string::npos) throw std::runtime_error(path + ": missing payload separator");
  return {all.substr(0, at + 1), all.substr(at + sep.size())};
}

void append_pose(std::string& payload, const body::Pose& p) {
  for (const auto& r : p.local_rot)
    for (float v : r.v) put_f32(payload, v);
  put_f32(payload, p.root_pos.x);
  put_f32(payload, p.root_pos.y);
  put_f32(payload, p.root_pos.z);
  for (float v : p.root_rot.v) put_f32(payload, v);
}

body::Pose read_pose(const unsigned char* p, int J) {
  body::Pose out = body::Pose::rest(J);
  size_t k = 0;
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < 6; ++i, k += 4) out.local_rot[j].v[i] = get_f32(p + k);
  out.root_pos.x = get_f32(p + k);
  k += 4;
  out.root_pos.y = get_f32(p + k);
  k += 4;
  out.root_pos.z = get_f32(p + k);
  k += 4;
  for (int i = 0; i < 6; ++i, k += 4) out.root_rot.v[i] = get_f32(p + k);
  return out;
}

void check_crc_and_size(const RawFile& raw, const KvLines& kv, const std::string& path) {
  long floats = -1;
  long crc = -1;
  for (const auto& [k, v] : kv) {
    if (k == "payload_floats") floats = parse_i(v);
    if (k == "crc32") crc = parse_i(v);
  }
  if (floats < 0 || crc < 0) throw std::runtime_error(path + ": manifest missing payload fields");
  if (raw.payload.size() != static_cast<size_t>(floats) * 4)
    throw std::runtime_error(path + ": payload truncated or oversized");
  if (static_cast<long>(payload_crc(raw.payload)) != crc)
    throw std::runtime_error(path + ": payload checksum mismatch");
}

}  // namespace

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void save_sequence(const data::SequenceSample& s, const std::string& path) {
  s.validate();
  std::string payload;
  for (const auto& fr : s.x)
    for (float v : fr.flat()) put_f32(payload, v);
  for (const auto& c : s.clouds)
    for (const auto& p : c.points) {
      put_f32(payload, p.x);
      put_f32(payload, p.y);
      put_f32(payload, p.z);
    }
  for (const auto& c : s.clouds)
    for (int l : c.label) put_f32(payload, static_cast<float>(l));
  for (const auto& p : s.synth) append_pose(payload, p);
  for (const auto& p : s.gt) append_pose(payload, p);

  std::ostringstream h;
  h << "schema=" << kSeqSchema << "\n";
  h << "n_frames=" << s.N << "\n";
  h << "points=" << s.P << "\n";
  h << "joints=" << s.J << "\n";
  h << "fps=" << fmt_hexfloat(s.fps) << "\n";
  h << "protocol=" << s.protocol << "\n";
  h << "domain=" << s.domain_tag << "\n";
  h << "rig_mount=" << fmt_hexfloat(s.rig.mount_offset.x) << " "
    << fmt_hexfloat(s.rig.mount_offset.y) << " " << fmt_hexfloat(s.rig.mount_offset.z) << "\n";
  h << "rig_fov=" << fmt_hexfloat(s.rig.fov_half_angle) << "\n";
  h << "rig_range=" << fmt_hexfloat(s.rig.max_range) << "\n";
  h << "rig_view=" << fmt_hexfloat(s.rig.view_dir.x) << " " << fmt_hexfloat(s.rig.view_dir.y)
    << " " << fmt_hexfloat(s.rig.view_dir.z) << "\n";
  h << "has_gt=" << (s.has_gt() ? 1 : 0) << "\n";
  h << "has_labels=" << (!s.clouds.empty() && !s.clouds[0].label.empty() ? 1 : 0) << "\n";
  h << "payload_floats=" << payload.size() / 4 << "\n";
  h << "crc32=" << payload_crc(payload) << "\n";
  h << "---\n";
  write_text_file(path, h.str() + payload);
}

data::SequenceSample load_sequence(const std::string& path) {
  const RawFile raw = read_split(path);
  const KvLines kv = parse_kv_lines(raw.header);
  if (kv.empty() || kv[0].first != "schema")
    throw std::runtime_error(path + ": missing schema line");
  if (kv[0].second != kSeqSchema)
    throw std::runtime_error(path + ": unknown schema version " + kv[0].second);
  check_crc_and_size(raw, kv, path);

  data::SequenceSample s;
  int has_gt = -1, has_labels = -1;
  for (const auto& [k, v] : kv) {
    if (k == "schema" || k == "payload_floats" || k == "crc32") continue;
    if (k == "n_frames")
      s.N = static_cast<int>(parse_i(v));
    else if (k == "points")
      s.P = static_cast<int>(parse_i(v));
    else if (k == "joints")
      s.J = static_cast<int>(parse_i(v));
    else if (k == "fps")
      s.fps = parse_f(v);
    else if (k == "protocol")
      s.protocol = v;
    else if (k == "domain")
      s.domain_tag = v;
    else if (k == "rig_mount") {
      const auto m = parse_f_list(v, 3);
      s.rig.mount_offset = {m[0], m[1], m[2]};
    } else if (k == "rig_fov")
      s.rig.fov_half_angle = parse_f(v);
    else if (k == "rig_range")
      s.rig.max_range = parse_f(v);
    else if (k == "rig_view") {
      const auto m = parse_f_list(v, 3);
      s.rig.view_dir = {m[0], m[1], m[2]};
    } else if (k == "has_gt")
      has_gt = static_cast<int>(parse_i(v));
    else if (k == "has_labels")
      has_labels = static_cast<int>(parse_i(v));
    else
      throw std::runtime_error(path + ": unknown manifest key " + k);
  }
  if (s.N <= 0 || s.P <= 0 || s.J <= 0 || has_gt < 0 || has_labels < 0)
    throw std::runtime_error(path + ": incomplete manifest");

  const size_t pose_floats = static_cast<size_t>(s.J) * 6 + 9;
  const size_t want = static_cast<size_t>(s.N) * 54 +
                      static_cast<size_t>(s.N) * s.P * (has_labels ? 4 : 3) +
                      static_cast<size_t>(s.N) * pose_floats * (has_gt ? 2 : 1);
  if (raw.payload.size() != want * 4)
    throw std::runtime_error(path + ": payload extent does not match manifest");

  const auto* p = reinterpret_cast<const unsigned char*>(raw.payload.data());
  size_t off = 0;
  s.x.resize(s.N);
  for (int t = 0; t < s.N; ++t) {
    float buf[54];
    for (int i = 0; i < 54; ++i, off += 4) buf[i] = get_f32(p + off);
    s.x[t] = body::ThreePointFrame::from_flat(buf);
  }
  s.clouds.resize(s.N);
  for (int t = 0; t < s.N; ++t) {
    s.clouds[t].points.resize(s.P);
    for (int i = 0; i < s.P; ++i) {
      s.clouds[t].points[i].x = get_f32(p + off);
      off += 4;
      s.clouds[t].points[i].y = get_f32(p + off);
      off += 4;
      s.clouds[t].points[i].z = get_f32(p + off);
      off += 4;
    }
  }
  if (has_labels)
    for (int t = 0; t < s.N; ++t) {
      s.clouds[t].label.resize(s.P);
      for (int i = 0; i < s.P; ++i, off += 4)
        s.clouds[t].label[i] = static_cast<int>(get_f32(p + off));
    }
  s.synth.resize(s.N);
  for (int t = 0; t < s.N; ++t, off += pose_floats * 4) s.synth[t] = read_pose(p + off, s.J);
  if (has_gt) {
    s.gt.resize(s.N);
    for (int t = 0; t < s.N; ++t, off += pose_floats * 4) s.gt[t] = read_pose(p + off, s.J);
  }
  s.validate();
  return s;
}

void save_checkpoint(const nn::ParamStore<float>& ps,
                     const std::map<std::string, std::string>& meta, const std::string& path) {
  std::string payload;
  std::ostringstream h;
  h << "schema=" << kCkptSchema << "\n";
  for (const auto& [k, v] : meta) {
    if (k.find('=') != std::string::npos || k.find(' ') != std::string::npos)
      throw std::invalid_argument("checkpoint meta key must not contain '=' or spaces: " + k);
    h << "meta." << k << "=" << v << "\n";
  }
  for (const auto& e : ps.entries) {
    h << "param=" << e.name << " " << e.value.shape.size();
    for (int d : e.value.shape) h << " " << d;
    h << "\n";
    for (float v : e.value.data) put_f32(payload, v);
  }
  h << "payload_floats=" << payload.size() / 4 << "\n";
  h << "crc32=" << payload_crc(payload) << "\n";
  h << "---\n";
  write_text_file(path, h.str() + payload);
}

Checkpoint load_checkpoint(const std::string& path) {
  const RawFile raw = read_split(path);
  const KvLines kv = parse_kv_lines(raw.header);
  if (kv.empty() || kv[0].first != "schema")
    throw std::runtime_error(path + ": missing schema line");
  if (kv[0].second != kCkptSchema)
    throw std::runtime_error(path + ": unknown schema version " + kv[0].second);
  check_crc_and_size(raw, kv, path);

  Checkpoint out;
  const auto* p = reinterpret_cast<const unsigned char*>(raw.payload.data());
  size_t off = 0;
  for (const auto& [k, v] : kv) {
    if (k == "schema" || k == "payload_floats" || k == "crc32") continue;
    if (k.rfind("meta.", 0) == 0) {
      out.meta[k.substr(5)] = v;
      continue;
    }
    if (k != "param") throw std::runtime_error(path + ": unknown manifest key " + k);
    std::istringstream is(v);
    std::string name;
    int rank = -1;
    if (!(is >> name >> rank) || rank < 0 || rank > 8)
      throw std::runtime_error(path + ": malformed param line " + v);
    std::vector<int> shape(rank);
    for (int i = 0; i < rank; ++i)
      if (!(is >> shape[i]) || shape[i] <= 0)
        throw std::runtime_error(path + ": malformed param shape " + v);
    ad::Tensor<float> t = ad::Tensor<float>::zeros(shape);
    if (off + t.data.size() * 4 > raw.payload.size())
      throw std::runtime_error(path + ": payload shorter than declared params");
    for (auto& val : t.data) {
      val = get_f32(p + off);
      off += 4;
    }
    out.params.add(name, std::move(t));
  }
  if (off != raw.payload.size())
    throw std::runtime_error(path + ": payload longer than declared params");
  return out;
}

void export_ply(const std::vector<Vec3f>& points, const std::vector<int>& labels,
                const std::string& path) {
  if (points.size() != labels.size())
    throw std::invalid_argument("export_ply: one label per point required");
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << points.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property int label\nend_header\n";
  char buf[128];
  for (size_t i = 0; i < points.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %d\n", static_cast<double>(points[i].x),
                  static_cast<double>(points[i].y), static_cast<double>(points[i].z), labels[i]);
    out << buf;
  }
  write_text_file(path, out.str());
}

PlyCloud parse_ply(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  long n = -1;
  bool in_header = true;
  while (in_header && std::getline(is, line)) {
    if (line.rfind("element vertex ", 0) == 0) n = parse_i(line.substr(15));
    if (line == "end_header") in_header = false;
  }
  if (in_header || n < 0) throw std::runtime_error(path + ": not a PLY with a vertex element");
  PlyCloud c;
  c.points.resize(n);
  c.labels.resize(n);
  for (long i = 0; i < n; ++i) {
    if (!(is >> c.points[i].x >> c.points[i].y >> c.points[i].z >> c.labels[i]))
      throw std::runtime_error(path + ": truncated vertex list");
  }
  return c;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> cfg;
  std::istringstream is(text);
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
      throw std::invalid_argument("malformed config line: " + line);
    cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

std::map<std::string, std::string> load_config(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

void apply_overrides(std::map<std::string, std::string>& cfg,
                     const std::vector<std::string>& kvs) {
  for (const auto& kv : kvs) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("override must be key=value: " + kv);
    cfg[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
}

}  // namespace xrmbt::io
