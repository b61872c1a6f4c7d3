#include "mtforge/text_norm.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "mtforge/error.hpp"
#include "mtforge/utf8.hpp"

namespace mtforge::text {

namespace {

struct PunctEntry {
  char32_t cp;
  const char* repl;
};

// Normalization table, v1. Kept byte-identical with data/punct_norm.tsv
// (checked by a unit test). All replacements are ASCII so the mapping is
// idempotent.
constexpr PunctEntry kPunctTable[] = {
    // CJK punctuation
    {0x3001, ","}, {0x3002, "."}, {0x3008, "'"}, {0x3009, "'"}, {0x300A, "\""},
    {0x300B, "\""}, {0x300C, "\""}, {0x300D, "\""}, {0x300E, "\""}, {0x300F, "\""},
    {0x3010, "["}, {0x3011, "]"}, {0x3014, "("}, {0x3015, ")"}, {0x30FB, "."},
    // fullwidth ASCII block
    {0xFF01, "!"}, {0xFF02, "\""}, {0xFF03, "#"}, {0xFF04, "$"}, {0xFF05, "%"},
    {0xFF06, "&"}, {0xFF07, "'"}, {0xFF08, "("}, {0xFF09, ")"}, {0xFF0A, "*"},
    {0xFF0B, "+"}, {0xFF0C, ","}, {0xFF0D, "-"}, {0xFF0E, "."}, {0xFF0F, "/"},
    {0xFF10, "0"}, {0xFF11, "1"}, {0xFF12, "2"}, {0xFF13, "3"}, {0xFF14, "4"},
    {0xFF15, "5"}, {0xFF16, "6"}, {0xFF17, "7"}, {0xFF18, "8"}, {0xFF19, "9"},
    {0xFF1A, ":"}, {0xFF1B, ";"}, {0xFF1C, "<"}, {0xFF1D, "="}, {0xFF1E, ">"},
    {0xFF1F, "?"}, {0xFF20, "@"},
    {0xFF21, "A"}, {0xFF22, "B"}, {0xFF23, "C"}, {0xFF24, "D"}, {0xFF25, "E"},
    {0xFF26, "F"}, {0xFF27, "G"}, {0xFF28, "H"}, {0xFF29, "I"}, {0xFF2A, "J"},
    {0xFF2B, "K"}, {0xFF2C, "L"}, {0xFF2D, "M"}, {0xFF2E, "N"}, {0xFF2F, "O"},
    {0xFF30, "P"}, {0xFF31, "Q"}, {0xFF32, "R"}, {0xFF33, "S"}, {0xFF34, "T"},
    {0xFF35, "U"}, {0xFF36, "V"}, {0xFF37, "W"}, {0xFF38, "X"}, {0xFF39, "Y"},
    {0xFF3A, "Z"},
    {0xFF3B, "["}, {0xFF3C, "\\"}, {0xFF3D, "]"}, {0xFF3E, "^"}, {0xFF3F, "_"},
    {0xFF40, "`"},
    {0xFF41, "a"}, {0xFF42, "b"}, {0xFF43, "c"}, {0xFF44, "d"}, {0xFF45, "e"},
    {0xFF46, "f"}, {0xFF47, "g"}, {0xFF48, "h"}, {0xFF49, "i"}, {0xFF4A, "j"},
    {0xFF4B, "k"}, {0xFF4C, "l"}, {0xFF4D, "m"}, {0xFF4E, "n"}, {0xFF4F, "o"},
    {0xFF50, "p"}, {0xFF51, "q"}, {0xFF52, "r"}, {0xFF53, "s"}, {0xFF54, "t"},
    {0xFF55, "u"}, {0xFF56, "v"}, {0xFF57, "w"}, {0xFF58, "x"}, {0xFF59, "y"},
    {0xFF5A, "z"},
    {0xFF5B, "{"}, {0xFF5C, "|"}, {0xFF5D, "}"}, {0xFF5E, "~"},
    // quotes
    {0x00AB, "\""}, {0x00BB, "\""}, {0x2018, "'"}, {0x2019, "'"}, {0x201A, "'"},
    {0x201C, "\""}, {0x201D, "\""}, {0x201E, "\""}, {0x2039, "'"}, {0x203A, "'"},
    // dashes
    {0x2010, "-"}, {0x2011, "-"}, {0x2012, "-"}, {0x2013, "-"}, {0x2014, "-"},
    {0x2015, "-"}, {0x2212, "-"},
    // ellipsis
    {0x2026, "..."}, {0x22EF, "..."},
    // spaces; zero-width characters are dropped outright
    {0x00A0, " "}, {0x2000, " "}, {0x2001, " "}, {0x2002, " "}, {0x2003, " "},
    {0x2004, " "}, {0x2005, " "}, {0x2006, " "}, {0x2007, " "}, {0x2008, " "},
    {0x2009, " "}, {0x200A, " "}, {0x202F, " "}, {0x205F, " "}, {0x3000, " "},
    {0x200B, ""}, {0xFEFF, ""},
};

const std::unordered_map<char32_t, std::string>& punct_map() {
  static const auto* map = [] {
    auto* m = new std::unordered_map<char32_t, std::string>();
    for (const auto& e : kPunctTable) (*m)[e.cp] = e.repl;
    return m;
  }();
  return *map;
}

// Characters detached from word edges by tokenize_en. '_' is included so
// ordinary text can never yield a reserved case marker token.
bool is_detachable(char32_t cp) {
  if (cp < 0x80) {
    static const std::string ascii = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
    return ascii.find(static_cast<char>(cp)) != std::string::npos;
  }
  return utf8::is_punct(cp);
}

bool token_is_upper_word(const std::string& tok) {
  int letters = 0;
  for (char32_t cp : utf8::decode_all(tok)) {
    if (utf8::is_ascii_lower(cp)) return false;
    if (utf8::is_ascii_upper(cp)) ++letters;
  }
  return letters >= 2;
}

bool token_is_title_word(const std::string& tok) {
  bool first = true;
  for (char32_t cp : utf8::decode_all(tok)) {
    if (utf8::is_ascii_upper(cp)) {
      if (!first) return false;
      first = false;
    } else if (utf8::is_ascii_letter(cp)) {
      if (first) return false;  // first letter is lowercase
      first = false;
    }
  }
  return !first;  // saw at least one letter, and the first one was uppercase
}

std::string lower_ascii(const std::string& tok) {
  std::string out = tok;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
  return out;
}

}  // namespace

bool is_case_marker(const std::string& token) {
  return token == kTitleMarker || token == kUpperMarker;
}

std::vector<std::pair<char32_t, std::string>> punct_table() {
  std::vector<std::pair<char32_t, std::string>> out;
  for (const auto& e : kPunctTable) out.emplace_back(e.cp, e.repl);
  return out;
}

RawSentence normalize_punct(const RawSentence& s) {
  const auto& map = punct_map();
  std::string mapped;
  mapped.reserve(s.text.size());
  size_t i = 0;
  while (i < s.text.size()) {
    char32_t cp = utf8::decode(s.text, i);
    auto it = map.find(cp);
    if (it == map.end()) {
      utf8::append(mapped, cp);
    } else {
      mapped += it->second;
    }
  }
  // collapse space runs, trim ends
  std::string out;
  out.reserve(mapped.size());
  bool pending_space = false;
  for (char c : mapped) {
    if (c == ' ') {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return {out, s.lang};
}

TokenSentence tokenize_en(const RawSentence& s) {
  TokenSentence out;
  out.lang = Lang::EN;
  const std::string& text = s.text;
  size_t i = 0;
  while (i < text.size()) {
    // next whitespace-delimited chunk
    while (i < text.size()) {
      size_t j = i;
      if (!utf8::is_space(utf8::decode(text, j))) break;
      i = j;
    }
    if (i >= text.size()) break;
    std::vector<char32_t> chunk;
    while (i < text.size()) {
      size_t j = i;
      char32_t cp = utf8::decode(text, j);
      if (utf8::is_space(cp)) break;
      chunk.push_back(cp);
      i = j;
    }
    // peel leading and trailing detachable characters
    size_t lo = 0, hi = chunk.size();
    std::vector<std::string> lead, trail;
    while (lo < hi && is_detachable(chunk[lo])) {
      std::string t;
      utf8::append(t, chunk[lo++]);
      lead.push_back(t);
    }
    while (hi > lo && is_detachable(chunk[hi - 1])) {
      std::string t;
      utf8::append(t, chunk[--hi]);
      trail.push_back(t);
    }
    for (auto& t : lead) out.tokens.push_back(std::move(t));
    if (hi > lo) {
      std::string core;
      for (size_t k = lo; k < hi; ++k) utf8::append(core, chunk[k]);
      out.tokens.push_back(std::move(core));
    }
    for (auto it = trail.rbegin(); it != trail.rend(); ++it) out.tokens.push_back(std::move(*it));
  }
  return out;
}

TokenSentence segment_zh(const RawSentence& s, const std::set<std::string>& lexicon) {
  size_t max_word_cps = 1;
  for (const auto& w : lexicon) max_word_cps = std::max(max_word_cps, utf8::count(w));

  std::vector<char32_t> cps;
  for (char32_t cp : utf8::decode_all(s.text))
    if (!utf8::is_space(cp)) cps.push_back(cp);

  TokenSentence out;
  out.lang = Lang::ZH;
  size_t i = 0;
  while (i < cps.size()) {
    // longest lexicon match wins; single character is the fallback
    size_t best = 1;
    std::string best_word;
    utf8::append(best_word, cps[i]);
    std::string candidate = best_word;
    for (size_t len = 2; len <= max_word_cps && i + len <= cps.size(); ++len) {
      utf8::append(candidate, cps[i + len - 1]);
      if (lexicon.count(candidate)) {
        best = len;
        best_word = candidate;
      }
    }
    out.tokens.push_back(best_word);
    i += best;
  }
  return out;
}

TokenSentence mark_case(const TokenSentence& t) {
  TokenSentence out;
  out.lang = t.lang;
  out.tokens.reserve(t.tokens.size());
  for (const auto& tok : t.tokens) {
    if (is_case_marker(tok))
      raise(Errc::input_contains_marker, "reserved marker in input: " + tok);
    if (token_is_upper_word(tok)) {
      out.tokens.push_back(kUpperMarker);
      out.tokens.push_back(lower_ascii(tok));
    } else if (token_is_title_word(tok)) {
      out.tokens.push_back(kTitleMarker);
      out.tokens.push_back(lower_ascii(tok));
    } else {
      out.tokens.push_back(tok);
    }
  }
  return out;
}

TokenSentence unmark_case(const TokenSentence& t) {
  TokenSentence out;
  out.lang = t.lang;
  out.tokens.reserve(t.tokens.size());
  for (size_t i = 0; i < t.tokens.size(); ++i) {
    const auto& tok = t.tokens[i];
    if (!is_case_marker(tok)) {
      out.tokens.push_back(tok);
      continue;
    }
    if (i + 1 >= t.tokens.size() || is_case_marker(t.tokens[i + 1]))
      raise(Errc::dangling_marker, "marker not followed by a word: " + tok);
    std::string word = t.tokens[i + 1];
    if (tok == kUpperMarker) {
      for (char& c : word)
        if (c >= 'a' && c <= 'z') c -= 'a' - 'A';
    } else {
      for (char& c : word) {
        if (c >= 'a' && c <= 'z') {
          c -= 'a' - 'A';
          break;
        }
        if (c >= 'A' && c <= 'Z') break;
      }
    }
    out.tokens.push_back(word);
    ++i;
  }
  return out;
}

RawSentence detokenize_en(const TokenSentence& t) {
  static const std::string no_space_before = ".,;:?!%)]}";
  static const std::string no_space_after = "([{";
  std::string out;
  bool quote_open = false, squote_open = false;
  bool suppress_next_space = false;
  for (const auto& tok : t.tokens) {
    bool suppress_this = suppress_next_space;
    suppress_next_space = false;
    if (tok.size() == 1) {
      char c = tok[0];
      if (no_space_before.find(c) != std::string::npos) {
        out += tok;
        continue;
      }
      if (no_space_after.find(c) != std::string::npos) {
        if (!out.empty() && !suppress_this) out.push_back(' ');
        out += tok;
        suppress_next_space = true;
        continue;
      }
      if (c == '"' || c == '\'') {
        bool& open = (c == '"') ? quote_open : squote_open;
        if (open) {
          out += tok;  // closing: attach to the left
          open = false;
        } else {
          if (!out.empty() && !suppress_this) out.push_back(' ');
          out += tok;
          suppress_next_space = true;  // opening: attach to the right
          open = true;
        }
        continue;
      }
    }
    if (!out.empty() && !suppress_this) out.push_back(' ');
    out += tok;
  }
  return {out, Lang::EN};
}

std::set<std::string> load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io, "cannot open lexicon: " + path);
  std::set<std::string> lex;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lex.insert(line);
  }
  return lex;
}

}  // namespace mtforge::text
