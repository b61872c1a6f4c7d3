#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mtforge/lang.hpp"

namespace mtforge::model {

// Token <-> id mapping with fixed special slots. Reserved tokens (tags,
// case markers) are inserted right after the specials so every model built
// from the same reserved list agrees on their ids.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocab();

  // Corpus tokens ranked by (frequency desc, token asc); max_size 0 = no cap.
  static Vocab build(const std::vector<TokenSentence>& corpus,
                     const std::vector<std::string>& reserved = {}, size_t max_size = 0);
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  int id(const std::string& tok) const;  // kUnk when absent
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id2tok_.size()); }

  std::vector<int> encode(const TokenSentence& t) const;
  TokenSentence decode(const std::vector<int>& ids, Lang lang) const;

  const std::vector<std::string>& tokens() const { return id2tok_; }
  bool operator==(const Vocab& o) const { return id2tok_ == o.id2tok_; }

 private:
  std::vector<std::string> id2tok_;
  std::unordered_map<std::string, int> tok2id_;
  void push(const std::string& tok);
};

}  // namespace mtforge::model
