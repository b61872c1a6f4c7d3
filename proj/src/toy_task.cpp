#include "mtforge/toy_task.hpp"

#include <algorithm>
#include <numeric>

#include "mtforge/error.hpp"
#include "mtforge/rng.hpp"
#include "mtforge/utf8.hpp"

namespace mtforge::toy {

namespace {

// Fixed substitution cipher: the "language" itself never changes, only the
// sampled sentences do. A multiplicative map with a stride coprime to the
// alphabet size is a permutation.
int cipher(int index, int vocab) {
  for (int stride : {37, 11, 7, 3, 1}) {
    if (std::gcd(stride, vocab) == 1) return (index * stride + 13) % vocab;
  }
  return index;
}

}  // namespace

std::string src_token(int index) {
  std::string s;
  utf8::append(s, static_cast<char32_t>(0x4E00 + index * 13));
  return s;
}

std::string tgt_token(int index, int vocab) {
  (void)vocab;
  std::string s = "w";
  s.push_back(static_cast<char>('a' + index / 26));
  s.push_back(static_cast<char>('a' + index % 26));
  return s;
}

TokenSentence make_source(const ToyTaskSpec& spec, uint64_t sentence_seed) {
  Rng rng(sentence_seed);
  int len = spec.min_len +
            static_cast<int>(rng.bounded(static_cast<uint64_t>(spec.max_len - spec.min_len + 1)));
  int lo = 0, hi = spec.vocab;
  if (spec.domain == Domain::NEWS)
    hi = spec.vocab * 3 / 4;
  else if (spec.domain == Domain::BIO)
    lo = spec.vocab / 4;

  TokenSentence src;
  src.lang = Lang::ZH;
  for (int i = 0; i < len; ++i) {
    int idx = lo + static_cast<int>(rng.bounded(static_cast<uint64_t>(hi - lo)));
    src.tokens.push_back(src_token(idx));
  }
  return src;
}

TokenSentence reference_translation(const TokenSentence& src, int vocab) {
  // invert src_token, apply the cipher, then swap adjacent pairs
  std::vector<int> indices;
  for (const auto& tok : src.tokens) {
    auto cps = utf8::decode_all(tok);
    if (cps.size() != 1) raise(Errc::invalid_arg, "not a toy source token: " + tok);
    int idx = static_cast<int>(cps[0] - 0x4E00) / 13;
    indices.push_back(cipher(idx, vocab));
  }
  for (size_t i = 0; i + 1 < indices.size(); i += 2) std::swap(indices[i], indices[i + 1]);

  TokenSentence tgt;
  tgt.lang = Lang::EN;
  for (int idx : indices) tgt.tokens.push_back(tgt_token(idx, vocab));
  return tgt;
}

SentencePair make_pair(const ToyTaskSpec& spec, uint64_t sentence_seed) {
  SentencePair p;
  p.src = make_source(spec, sentence_seed);
  p.tgt = reference_translation(p.src, spec.vocab);
  p.origin = Origin::REAL;
  p.domain = spec.domain;
  return p;
}

Corpus make_corpus(const ToyTaskSpec& spec, size_t n, uint64_t salt) {
  Corpus out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i)
    out.push_back(make_pair(spec, mix_seed(spec.seed ^ salt, i)));
  return out;
}

std::vector<TokenSentence> make_mono_src(const ToyTaskSpec& spec, size_t n, uint64_t salt) {
  std::vector<TokenSentence> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i)
    out.push_back(make_source(spec, mix_seed(spec.seed ^ salt, i)));
  return out;
}

std::vector<TokenSentence> make_mono_tgt(const ToyTaskSpec& spec, size_t n, uint64_t salt) {
  std::vector<TokenSentence> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i)
    out.push_back(reference_translation(make_source(spec, mix_seed(spec.seed ^ salt, i)),
                                        spec.vocab));
  return out;
}

}  // namespace mtforge::toy
