// SPDX-License-Identifier: Apache-2.0
//
// Joint training of the registration and refinement networks over mixed
// mocap-synthetic and pseudo-real batches, plus the ablation-ladder harness.
// Synthesis is frozen: the trainer owns no synthesis parameters and only
// resamples oracle outputs, so the registration/refinement step can never
// touch the synthesis stage.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xrmbt/losses.hpp"
#include "xrmbt/metrics.hpp"
#include "xrmbt/mpe.hpp"
#include "xrmbt/sequence.hpp"
#include "xrmbt/spc.hpp"
#include "xrmbt/synthesis.hpp"

namespace xrmbt::train {

enum class Mode {
  kSynthesisOnly,          // bundled synthesis, no trained parameters
  kMpe,                    // encoder feature + residual refinement
  kMpeSpcDecoder,          // + registration decoder and its ce loss
  kMpeSpcDecoderPcLoss,    // + naive point-to-surface loss on both domains
  kMpeSpcDecoderSpcLoss,   // + semantic hinge loss on both domains
};

Mode mode_from_string(const std::string& s);
const char* mode_name(Mode m);
bool mode_has_mpe(Mode m);
bool mode_has_decoder(Mode m);
bool mode_uses_real(Mode m);
const std::vector<Mode>& all_modes();

struct TrainConfig {
  int iterations = 20000;
  float lr = 3e-4f;
  int batch_mocap = 128;  // frames per step, multiple of window
  int batch_real = 32;    // frames per step for modes that use pseudo-real
  int window = 16;        // contiguous frames per sampled window
  loss::LossWeights weights;
  Mode mode = Mode::kMpeSpcDecoderSpcLoss;
  std::uint64_t seed = 1;
  net::SpcConfig spc;
  net::MpeConfig mpe;
  synth::OracleConfig oracle;  // per-batch synthesis resampling

  void validate() const;
  static TrainConfig desk();
};

struct Datasets {
  std::vector<data::SequenceSample> mocap;
  std::vector<data::SequenceSample> real;  // pseudo-real; *_pcloss/_spcloss only
  std::vector<data::SequenceSample> eval_mocap;
  std::vector<data::SequenceSample> eval_real;
};

struct RunArtifacts {
  nn::ParamStore<float> params;
  std::map<std::string, std::string> meta;
  std::vector<std::string> log;  // csv rows, header + one per completed iteration
  bool aborted = false;          // non-finite loss; params hold the last good state
  int completed_iterations = 0;

  std::string log_csv() const;
};

/// Parameters a mode trains (empty for synthesis_only), Glorot-initialized
/// from cfg.seed with the refinement output layer zeroed.
nn::ParamStore<float> init_params(const TrainConfig& cfg);

/// One Adam step per iteration on the combined loss. `warm_start`, when
/// given, is copied instead of fresh initialization (fine-tuning).
RunArtifacts train(const TrainConfig& cfg, const Datasets& ds,
                   const nn::ParamStore<float>* warm_start = nullptr);

/// Full pipeline on one sequence using the bundled synthesis sample; causal
/// registration features feed the refinement. synthesis_only returns the
/// bundle unchanged.
std::vector<body::Pose> predict_sequence(const TrainConfig& cfg,
                                         const nn::ParamStore<float>& params,
                                         const data::SequenceSample& s);

/// Full report over a held-out set with gt; per-action breakdown keyed by
/// protocol. Throws on skeleton mismatch or missing gt.
metrics::MetricReport evaluate(const TrainConfig& cfg, const nn::ParamStore<float>& params,
                               const std::vector<data::SequenceSample>& eval_set);

/// Mean point-to-surface distance (meters) of pipeline predictions; needs no
/// gt, so it covers pseudo-real evaluation.
double evaluate_pc(const TrainConfig& cfg, const nn::ParamStore<float>& params,
                   const std::vector<data::SequenceSample>& eval_set);

struct LadderResult {
  std::map<std::string, metrics::MetricReport> reports;  // keyed by mode_name
  std::map<std::string, RunArtifacts> runs;
};

/// Trains every mode with identical seeds/datasets and evaluates all of them
/// on the same held-out set.
LadderResult run_ablation_ladder(const TrainConfig& base, const Datasets& ds);

/// crc32 over the entries (names, shapes, payload bits).
std::uint32_t params_checksum(const nn::ParamStore<float>& ps);

}  // namespace xrmbt::train
