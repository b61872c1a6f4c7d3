#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mtforge/augment.hpp"
#include "mtforge/filter.hpp"
#include "mtforge/model.hpp"
#include "mtforge/noise.hpp"

namespace mtforge::pipeline {

// Canonical stage order. A config enables a subset; the order never
// changes. Model-producing stages contribute a report row.
extern const std::vector<std::string> kStageOrder;

// Built-in synthetic data: general-domain (NEWS) bitext and source mono,
// in-domain (BIO) bitext, target mono and dev set. The report scores every
// row on the in-domain dev set.
struct ToyDataSpec {
  int vocab = 64;
  size_t train_pairs = 160;
  size_t mono_src = 240;
  size_t mono_tgt = 480;
  size_t indomain_pairs = 96;
  size_t dev = 48;
};

struct PipelineConfig {
  std::string work_dir = "pipeline_run";
  uint64_t seed = 42;
  std::vector<std::string> stages;  // subset of kStageOrder

  // Either generate the toy task in-process or point at prepared TSVs.
  std::optional<ToyDataSpec> toy;
  std::string bitext_path, mono_src_path, mono_tgt_path;
  std::string indomain_path, dev_src_path, dev_ref_path;

  filter::FilterRules filter_rules;
  size_t bpe_ops = 120;

  model::ModelConfig arch;          // vocab sizes filled at train time
  model::TrainHyper hyper;
  int train_steps = 500;
  int finetune_steps = 120;
  double finetune_lr_scale = 0.5;
  augment::NoiseSpec denoise;       // target denoising during fine-tune
  augment::SamplingSpec bt_sampling;
  int multi_bt_rounds = 2;
  int multi_bt_steps = 220;         // per-round generator training
  augment::NoiseSpec source_noise;  // synthetic-noise stage
  double noise_real_fraction = 0.1;

  size_t pool_size = 6;
  size_t ensemble_k = 3;
  double ensemble_lambda = 0.1;
  int beam = 4;

  static PipelineConfig from_json(const std::string& json_text);
  std::string to_json() const;
};

struct ReportRow {
  std::string label;
  double bleu = 0.0;
  bool starred = false;
};

struct AblationReport {
  std::vector<ReportRow> rows;
  std::string render_text() const;
  std::string render_json() const;
};

struct StageManifest {
  std::string stage;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
  uint64_t seed = 0;
  double wall_ms = 0.0;
  std::string tool_version;
  std::string to_json() const;
};

struct PipelineResult {
  AblationReport report;
  std::vector<StageManifest> manifests;
  // digest over every stage's output digests, in order; equal configs and
  // seeds must reproduce it exactly
  std::string chain_digest;
};

// Executes the enabled stages in canonical order under config.work_dir.
// `resume` skips stages whose manifest matches the current inputs and
// whose outputs are intact (digest_mismatch if an output was tampered
// with); `until` stops after the named stage. A lock file guards the
// directory. Stage errors surface as stage_failure with the stage id.
PipelineResult run_pipeline(const PipelineConfig& config, bool resume = false,
                            const std::string& until = "");

const char* tool_version();

}  // namespace mtforge::pipeline
