#pragma once

#include <memory>
#include <vector>

#include "mtforge/model.hpp"
#include "mtforge/vocab.hpp"

namespace mtforge::model {

// Source-side work shared by every hypothesis decoding one sentence:
// encoder output plus the per-layer cross-attention projections.
struct EncCache {
  Mat enc_out;
  std::vector<Mat> cross_k, cross_v;  // one per decoder layer
};

// Per-decoder-layer incremental state. Self layers cache grown K/V rows
// (linear in decoded length); Aan layers keep a running sum and count
// (constant in decoded length).
struct LayerState {
  Mat k_cache, v_cache;
  Vec aan_sum;
  long aan_count = 0;
};

struct DecodeState {
  std::shared_ptr<const EncCache> enc;
  std::vector<LayerState> layers;
  int pos = 0;

  // Scalars held in per-layer state; excludes the shared source cache.
  size_t layer_state_scalars() const;
};

std::shared_ptr<const EncCache> build_enc_cache(const Params& p, const std::vector<int>& src_ids);

DecodeState init_decode(const Params& p, std::shared_ptr<const EncCache> enc);

// Feeds one decoder-input token and returns the log-probability row for
// the next position. Matches the teacher-forced forward() for the same
// prefix. Throws state_mismatch when the state does not belong to p's
// layer plan.
Vec decode_step(const Params& p, DecodeState& state, int token_id);

struct Hypothesis {
  std::vector<int> tokens;  // emitted tokens, EOS included when produced
  double score = 0.0;       // sum of token log-probabilities
  double normalized = 0.0;  // score / len^alpha
};

struct DecodeOptions {
  int beam = 4;
  double length_penalty = 0.6;
  int max_len = 64;
};

// Length-normalized beam search over the mean of the member distributions
// (probability space). A single member reproduces plain beam search
// exactly; beam = 1 is greedy decoding. Deterministic: score ties break by
// token id, then parent order.
Hypothesis beam_decode(const std::vector<const Params*>& members, const std::vector<int>& src_ids,
                       const DecodeOptions& opt);

Hypothesis beam_decode(const Params& p, const std::vector<int>& src_ids, const DecodeOptions& opt);

// Nucleus candidate set: the shortest probability-sorted prefix whose
// cumulative mass exceeds p. Probability ties sort by token id.
std::vector<int> nucleus_set(const Vec& probs, double p);

struct SampleOptions {
  double top_p = 0.9;
  int max_len = 64;
};

Hypothesis nucleus_decode(const Params& p, const std::vector<int>& src_ids,
                          const SampleOptions& opt, Rng& rng);

// ------------------------------------------------------- model bundle

struct TranslationModel {
  ModelConfig cfg;
  Params params;
  Vocab src_vocab, tgt_vocab;

  TokenSentence translate(const TokenSentence& src, const DecodeOptions& opt = {}) const;
};

// Checkpoint container: magic + version, JSON header (config, vocabs,
// tensor directory), then little-endian float32 tensor data, column-major.
void save_model(const std::string& path, const TranslationModel& m);
TranslationModel load_model(const std::string& path);

}  // namespace mtforge::model
