#pragma once

#include <optional>
#include <vector>

#include "mtforge/model.hpp"
#include "mtforge/noise.hpp"
#include "mtforge/vocab.hpp"

namespace mtforge::model {

struct IdPair {
  std::vector<int> src, tgt;  // without BOS/EOS; added by the loop
};

std::vector<IdPair> encode_corpus(const Corpus& corpus, const Vocab& src_vocab,
                                  const Vocab& tgt_vocab);

struct TrainOptions {
  TrainHyper hyper;
  int max_steps = 1000;
  uint64_t seed = 1;
  double lr_scale = 1.0;  // < 1 for fine-tuning
  // Target denoising: corrupts teacher-forced decoder inputs (never the
  // loss targets). BOS is protected.
  std::optional<augment::NoiseSpec> target_denoise;
  int log_every = 0;  // 0 = silent
};

struct TrainStats {
  std::vector<double> step_losses;  // per optimizer step, token-normalized
  long steps = 0;
};

// Deterministic single-threaded training: label-smoothed cross-entropy,
// Adam with the inverse-sqrt schedule, gradient accumulation over
// update_freq micro-batches of ~batch_tokens tokens. Throws
// non_finite_loss if the loss or an update stops being finite.
TrainStats train_loop(Params& params, const std::vector<IdPair>& data, const TrainOptions& opt);

// Continued training on in-domain data at a reduced peak learning rate,
// optionally with target denoising. denoise == nullopt is exactly
// train_loop on the same options.
TrainStats finetune(Params& params, const std::vector<IdPair>& in_domain, TrainOptions opt);

// Central finite differences on n_samples randomly chosen parameters
// against the analytic gradient of the batch loss. Relative error uses
// |fd - an| / max(|fd|, |an|, 1e-6).
struct GradCheckResult {
  double max_rel_err = 0.0;
  long checked = 0;
};

GradCheckResult grad_check(const ModelConfig& cfg, uint64_t seed, int n_samples = 200,
                           double eps = 1e-4);

}  // namespace mtforge::model
