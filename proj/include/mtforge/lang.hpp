#pragma once

#include <string>
#include <vector>

namespace mtforge {

enum class Lang { ZH, EN };

// One line of raw text. No interior newlines; non-empty after trimming.
struct RawSentence {
  std::string text;
  Lang lang = Lang::EN;
};

// Tokenized sentence: tokens carry no whitespace and are never empty.
struct TokenSentence {
  std::vector<std::string> tokens;
  Lang lang = Lang::EN;

  bool operator==(const TokenSentence& o) const {
    return tokens == o.tokens && lang == o.lang;
  }
};

inline std::string join_tokens(const TokenSentence& t, char sep = ' ') {
  std::string out;
  for (size_t i = 0; i < t.tokens.size(); ++i) {
    if (i) out.push_back(sep);
    out += t.tokens[i];
  }
  return out;
}

TokenSentence split_tokens(const std::string& line, Lang lang);

enum class Origin { REAL, BT, FT, NOISE };
enum class Domain { BIO, NEWS, INHOUSE };

const char* to_string(Origin o);
const char* to_string(Domain d);
Origin origin_from_string(const std::string& s);
Domain domain_from_string(const std::string& s);

// Aligned bilingual pair. Both sides non-empty; labels always set.
struct SentencePair {
  TokenSentence src;  // ZH side
  TokenSentence tgt;  // EN side
  Origin origin = Origin::REAL;
  Domain domain = Domain::BIO;
};

using Corpus = std::vector<SentencePair>;

}  // namespace mtforge
