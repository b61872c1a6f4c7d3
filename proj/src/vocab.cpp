#include "mtforge/vocab.hpp"

#include <algorithm>
#include <map>

#include "mtforge/error.hpp"

namespace mtforge::model {

Vocab::Vocab() {
  push("<pad>");
  push("<s>");
  push("</s>");
  push("<unk>");
}

void Vocab::push(const std::string& tok) {
  if (tok2id_.count(tok)) return;
  tok2id_[tok] = static_cast<int>(id2tok_.size());
  id2tok_.push_back(tok);
}

Vocab Vocab::build(const std::vector<TokenSentence>& corpus,
                   const std::vector<std::string>& reserved, size_t max_size) {
  Vocab v;
  for (const auto& r : reserved) v.push(r);

  std::map<std::string, long> freq;
  for (const auto& sent : corpus)
    for (const auto& tok : sent.tokens)
      if (!v.tok2id_.count(tok)) ++freq[tok];

  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, _] : ranked) {
    if (max_size && v.id2tok_.size() >= max_size) break;
    v.push(tok);
  }
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  v.id2tok_.clear();
  v.tok2id_.clear();
  for (const auto& tok : tokens) v.push(tok);
  if (v.size() < 4) raise(Errc::parse, "vocab missing special tokens");
  return v;
}

int Vocab::id(const std::string& tok) const {
  auto it = tok2id_.find(tok);
  return it == tok2id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) raise(Errc::vocab_out_of_range, "token id " + std::to_string(id));
  return id2tok_[id];
}

std::vector<int> Vocab::encode(const TokenSentence& t) const {
  std::vector<int> ids;
  ids.reserve(t.tokens.size());
  for (const auto& tok : t.tokens) ids.push_back(id(tok));
  return ids;
}

TokenSentence Vocab::decode(const std::vector<int>& ids, Lang lang) const {
  TokenSentence t;
  t.lang = lang;
  t.tokens.reserve(ids.size());
  for (int id : ids) t.tokens.push_back(token(id));
  return t;
}

}  // namespace mtforge::model
