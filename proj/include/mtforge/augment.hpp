#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mtforge/decode.hpp"
#include "mtforge/lang.hpp"
#include "mtforge/noise.hpp"
#include "mtforge/train.hpp"

namespace mtforge::augment {

inline constexpr const char* kUnkToken = "<unk>";

// Reserved tokens exempt from noise: origin/domain tags and case markers.
const std::set<std::string>& default_protected();
bool is_tag(const std::string& token);

std::string origin_tag(Origin o);
std::string domain_tag(Domain d);

// Token-level noise. Each call derives its randomness from `rng`; use
// Rng(mix_seed(seed, index)) for reproducible per-sentence noise.
TokenSentence noise_unk(const TokenSentence& t, double rate, Rng& rng,
                        const std::set<std::string>& protected_tokens = default_protected());
TokenSentence noise_delete(const TokenSentence& t, double rate, Rng& rng,
                           const std::set<std::string>& protected_tokens = default_protected());
TokenSentence noise_swap(const TokenSentence& t, double rate, int window, Rng& rng,
                         const std::set<std::string>& protected_tokens = default_protected());

// unk, then delete, then swap, all seeded from spec.seed. Pure function of
// (input, spec).
TokenSentence apply_noise(const TokenSentence& t, const NoiseSpec& spec,
                          const std::set<std::string>& protected_tokens = default_protected());

std::string noise_spec_to_json(const NoiseSpec& spec);
NoiseSpec noise_spec_from_json(const std::string& json_text);

// -------------------------------------------------------------- tagging

// Prepends [origin-tag, domain-tag]. Throws already_tagged when position 0
// already carries a known tag.
TokenSentence tag_sentence(const TokenSentence& t, Origin origin, Domain domain);
TokenSentence strip_tags(const TokenSentence& t);

// Tags every pair's source side with its own origin/domain labels.
Corpus tag_corpus(const Corpus& corpus);

// Checks that every tagged source starts with exactly the tags implied by
// the pair's labels; returns the indices of offending pairs.
std::vector<size_t> audit_tags(const Corpus& corpus);

// ----------------------------------------------------------- generation

struct SamplingSpec {
  enum class Mode { BEAM, TOPP };
  Mode mode = Mode::BEAM;
  int beam_size = 4;
  double p_low = 0.9;
  double p_high = 0.95;
  uint64_t seed = 1;
  int max_len = 64;

  void validate() const;
  std::string to_json() const;
  static SamplingSpec from_json(const std::string& json_text);
};

// Synthesizes source sides for target-language monolingual text with the
// reverse model. TOPP mode draws p uniformly from [p_low, p_high] per
// sentence. Pairs come back origin=BT.
Corpus back_translate(const std::vector<TokenSentence>& mono_tgt,
                      const model::TranslationModel& reverse_model, const SamplingSpec& sampling,
                      Domain domain = Domain::BIO);

// Ensemble beam decoding of source-language monolingual text; origin=FT.
Corpus forward_translate(const std::vector<TokenSentence>& mono_src,
                         const std::vector<const model::TranslationModel*>& ensemble,
                         int beam_size = 4, Domain domain = Domain::BIO);

// Replaces each target with the teacher's beam output; origin is
// preserved (KD provenance belongs in run manifests, not in tags).
Corpus distill(const Corpus& bitext, const model::TranslationModel& teacher, int beam_size = 4);

// --------------------------------------------------------- iterative BT

struct MultiBtConfig {
  int rounds = 2;
  model::ModelConfig forward_cfg, reverse_cfg;  // vocab sizes filled per round
  model::TrainOptions train;
  SamplingSpec sampling;        // base spec; mode alternates per round
  bool include_forward = true;  // also add FT data from mono_src shards
  int beam_size = 4;
  Domain domain = Domain::BIO;
};

struct RoundManifest {
  int round = 0;
  std::string strategy;  // "beam" or "topp"
  size_t shard_begin = 0, shard_end = 0;
  uint64_t seed = 0;
  size_t generated = 0;
};

struct MultiBtResult {
  Corpus corpus;  // bitext + accumulated tagged synthetic data
  std::vector<RoundManifest> manifests;
};

// Per round: trains reverse (and optionally forward) models on the current
// corpus, back-translates a disjoint mono shard (beam on even rounds,
// top-p on odd), appends the tagged pseudo pairs. Throws insufficient_mono
// when a round's shard is empty.
MultiBtResult iterate_bt(const Corpus& bitext, const std::vector<TokenSentence>& mono_src,
                         const std::vector<TokenSentence>& mono_tgt, int rounds,
                         const MultiBtConfig& cfg);

}  // namespace mtforge::augment
