#include "mtforge/subword.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "mtforge/error.hpp"
#include "mtforge/utf8.hpp"

namespace mtforge::bpe {

namespace {

using Symbols = std::vector<std::string>;

Symbols word_to_symbols(const std::string& word) {
  Symbols syms;
  for (char32_t cp : utf8::decode_all(word)) {
    std::string s;
    utf8::append(s, cp);
    syms.push_back(std::move(s));
  }
  syms.push_back(kEow);
  return syms;
}

void merge_in_place(Symbols& syms, const std::string& left, const std::string& right) {
  size_t w = 0;
  for (size_t r = 0; r < syms.size(); ++r) {
    if (r + 1 < syms.size() && syms[r] == left && syms[r + 1] == right) {
      syms[w++] = left + right;
      ++r;
    } else {
      if (w != r) syms[w] = std::move(syms[r]);
      ++w;
    }
  }
  syms.resize(w);
}

}  // namespace

BpeModel bpe_learn(const std::vector<TokenSentence>& corpus, size_t n_ops,
                   const std::set<std::string>& protected_tokens) {
  if (n_ops < 1) raise(Errc::invalid_arg, "n_ops must be >= 1");

  // word frequency dictionary
  std::unordered_map<std::string, long> word_freq;
  for (const auto& sent : corpus)
    for (const auto& tok : sent.tokens)
      if (!protected_tokens.count(tok)) ++word_freq[tok];
  if (word_freq.empty()) raise(Errc::empty_corpus, "bpe_learn: no countable tokens");

  std::vector<std::pair<Symbols, long>> dict;
  dict.reserve(word_freq.size());
  {
    // deterministic iteration order
    std::map<std::string, long> sorted(word_freq.begin(), word_freq.end());
    for (auto& [word, freq] : sorted) dict.emplace_back(word_to_symbols(word), freq);
  }

  BpeModel model;
  model.n_ops = n_ops;
  model.protected_tokens = protected_tokens;

  for (size_t op = 0; op < n_ops; ++op) {
    // count adjacent pairs; std::map gives the lexicographic tie-break.
    // The bare sentinel never merges, so single-character words contribute
    // no pairs at all.
    std::map<std::pair<std::string, std::string>, long> pair_freq;
    for (const auto& [syms, freq] : dict)
      for (size_t i = 0; i + 1 < syms.size(); ++i)
        if (syms[i + 1] != kEow) pair_freq[{syms[i], syms[i + 1]}] += freq;

    std::pair<std::string, std::string> best;
    long best_count = 0;
    for (const auto& [pair, count] : pair_freq) {
      if (count > best_count && !protected_tokens.count(pair.first + pair.second)) {
        best = pair;
        best_count = count;
      }
    }
    if (best_count < 2) break;  // nothing left worth merging

    model.merges.push_back(best);
    for (auto& [syms, freq] : dict) merge_in_place(syms, best.first, best.second);
  }
  return model;
}

std::vector<std::string> apply_token(const std::string& token, const BpeModel& m) {
  Symbols syms = word_to_symbols(token);
  for (const auto& [left, right] : m.merges) {
    if (syms.size() < 3) break;  // only [char, sentinel] left
    if (left == kEow || right == kEow) continue;
    merge_in_place(syms, left, right);
  }
  // the sentinel never merges, so it is always a standalone final symbol
  syms.pop_back();
  std::vector<std::string> pieces;
  pieces.reserve(syms.size());
  for (size_t i = 0; i < syms.size(); ++i) {
    if (i + 1 < syms.size())
      pieces.push_back(syms[i] + kContinuation);
    else
      pieces.push_back(syms[i]);
  }
  return pieces;
}

TokenSentence bpe_apply(const TokenSentence& t, const BpeModel& m) {
  TokenSentence out;
  out.lang = t.lang;
  for (const auto& tok : t.tokens) {
    if (m.protected_tokens.count(tok)) {
      out.tokens.push_back(tok);
      continue;
    }
    for (auto& piece : apply_token(tok, m)) out.tokens.push_back(std::move(piece));
  }
  return out;
}

TokenSentence bpe_undo(const TokenSentence& t) {
  const std::string marker = kContinuation;
  TokenSentence out;
  out.lang = t.lang;
  std::string pending;
  for (size_t i = 0; i < t.tokens.size(); ++i) {
    const auto& tok = t.tokens[i];
    bool cont = tok.size() >= marker.size() &&
                tok.compare(tok.size() - marker.size(), marker.size(), marker) == 0;
    if (cont) {
      if (i + 1 == t.tokens.size())
        raise(Errc::dangling_continuation, "final token carries the continuation marker");
      pending += tok.substr(0, tok.size() - marker.size());
    } else {
      out.tokens.push_back(pending + tok);
      pending.clear();
    }
  }
  return out;
}

void BpeModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io, "cannot write bpe model: " + path);
  out << "#bpe v1 " << n_ops << "\n";
  for (const auto& [l, r] : merges) out << l << ' ' << r << "\n";
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io, "cannot open bpe model: " + path);
  std::string line;
  if (!std::getline(in, line)) raise(Errc::parse, "empty bpe model file");
  BpeModel m;
  {
    std::istringstream hdr(line);
    std::string magic, version;
    hdr >> magic >> version >> m.n_ops;
    if (magic != "#bpe" || version != "v1") raise(Errc::parse, "bad bpe model header: " + line);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto sp = line.find(' ');
    if (sp == std::string::npos) raise(Errc::parse, "bad merge line: " + line);
    m.merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return m;
}

}  // namespace mtforge::bpe
