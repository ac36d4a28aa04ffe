// SPDX-License-Identifier: Apache-2.0
//
// Bit-exact file formats: sequence files and checkpoints are a line-oriented
// key=value manifest followed by a little-endian float32 payload guarded by a
// crc32. Floats that appear in manifests are written as hex floats so text
// round trips are exact. Loaders validate schema version, extents, and
// checksum; corruption or truncation raises std::runtime_error.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "xrmbt/nn.hpp"
#include "xrmbt/sequence.hpp"

namespace xrmbt::io {

using body::Vec3f;

inline constexpr const char* kSeqSchema = "xrmbt-seq-v1";
inline constexpr const char* kCkptSchema = "xrmbt-ckpt-v1";

void save_sequence(const data::SequenceSample& s, const std::string& path);
data::SequenceSample load_sequence(const std::string& path);

struct Checkpoint {
  nn::ParamStore<float> params;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const nn::ParamStore<float>& ps,
                     const std::map<std::string, std::string>& meta, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// ASCII PLY with x, y, z float properties and an integer label property.
void export_ply(const std::vector<Vec3f>& points, const std::vector<int>& labels,
                const std::string& path);

struct PlyCloud {
  std::vector<Vec3f> points;
  std::vector<int> labels;
};
PlyCloud parse_ply(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// key=value lines; '#' starts a comment, blank lines skipped. Later keys
/// overwrite earlier ones. Malformed lines raise std::invalid_argument.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> load_config(const std::string& path);
/// Applies "key=value" strings on top of cfg.
void apply_overrides(std::map<std::string, std::string>& cfg,
                     const std::vector<std::string>& kvs);

}  // namespace xrmbt::io
