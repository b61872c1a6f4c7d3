#pragma once

#include <cstdint>
#include <vector>

#include "mtforge/lang.hpp"

namespace mtforge::toy {

// Synthetic bilingual task for end-to-end tests: the "source language" is
// a set of Han characters, the "target language" ASCII words. The target
// is the source under a fixed token substitution cipher followed by a
// deterministic local reordering (adjacent positions 2k and 2k+1 swap).
// Translation quality on this pair is measurable without external data.
struct ToyTaskSpec {
  int vocab = 64;       // cipher alphabet size
  int min_len = 3;
  int max_len = 9;
  uint64_t seed = 7;
  // Domains draw source tokens from different ranges of the alphabet:
  // NEWS from [0, 3*vocab/4), BIO from [vocab/4, vocab).
  Domain domain = Domain::NEWS;
};

std::string src_token(int index);               // Han character for cipher index
std::string tgt_token(int index, int vocab);    // ASCII word for ciphered index

TokenSentence make_source(const ToyTaskSpec& spec, uint64_t sentence_seed);
TokenSentence reference_translation(const TokenSentence& src, int vocab);

SentencePair make_pair(const ToyTaskSpec& spec, uint64_t sentence_seed);
Corpus make_corpus(const ToyTaskSpec& spec, size_t n, uint64_t salt = 0);

// Monolingual sides drawn from the same distribution.
std::vector<TokenSentence> make_mono_src(const ToyTaskSpec& spec, size_t n, uint64_t salt);
std::vector<TokenSentence> make_mono_tgt(const ToyTaskSpec& spec, size_t n, uint64_t salt);

}  // namespace mtforge::toy
