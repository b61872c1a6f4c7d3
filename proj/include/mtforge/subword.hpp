#pragma once

#include <set>
#include <string>
#include <vector>

#include "mtforge/lang.hpp"

namespace mtforge::bpe {

// End-of-word sentinel. It is a standalone symbol appended after the last
// character of every word, so it can take part in merges like any symbol.
inline constexpr const char* kEow = "</w>";

// Continuation marker carried by every non-final piece of a split token.
inline constexpr const char* kContinuation = "@@";

struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;  // learned order
  size_t n_ops = 0;                                         // requested op count
  std::set<std::string> protected_tokens;                   // pass through apply untouched

  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);
};

// Learns merges by repeatedly joining the most frequent adjacent symbol
// pair over word frequency counts. Count ties break by lexicographic
// (left, right) order, so the merge list is a pure function of the corpus.
// Protected tokens are excluded from counting. Stops early when no pair
// occurs twice. Throws empty_corpus when there is nothing to count.
BpeModel bpe_learn(const std::vector<TokenSentence>& corpus, size_t n_ops,
                   const std::set<std::string>& protected_tokens);

std::vector<std::string> apply_token(const std::string& token, const BpeModel& m);

// Splits each token to characters + kEow and replays the merges in learned
// order. Non-final pieces get the "@@" suffix; protected tokens pass
// through unchanged.
TokenSentence bpe_apply(const TokenSentence& t, const BpeModel& m);

// Joins "@@" pieces back together. Inverse of bpe_apply on any input free
// of the marker. Throws dangling_continuation if the last token carries it.
TokenSentence bpe_undo(const TokenSentence& t);

}  // namespace mtforge::bpe
