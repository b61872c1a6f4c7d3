#include <doctest.h>

#include <fstream>

#include "mtforge/error.hpp"
#include "mtforge/rng.hpp"
#include "mtforge/text_norm.hpp"
#include "mtforge/utf8.hpp"

using namespace mtforge;
using namespace mtforge::text;

namespace {

RawSentence en(const std::string& s) { return {s, Lang::EN}; }
RawSentence zh(const std::string& s) { return {s, Lang::ZH}; }

TokenSentence toks(std::vector<std::string> v, Lang lang = Lang::EN) {
  return {std::move(v), lang};
}

// random printable-ish string mixing ASCII, mapped punctuation and Han
std::string random_text(Rng& rng, size_t len) {
  static const std::vector<std::string> pool = {
      "a", "b", "Z", "1", " ", " ", "，", "。", "“", "”", "…", "—", "今", "天", "好", "."};
  std::string out;
  for (size_t i = 0; i < len; ++i) out += pool[rng.bounded(pool.size())];
  return out;
}

}  // namespace

TEST_CASE("normalize_punct maps the documented table") {
  CHECK(normalize_punct(en("“Hello，world”")).text == "\"Hello,world\"");
  CHECK(normalize_punct(en("abc")).text == "abc");
  CHECK(normalize_punct(en("…")).text == "...");
  CHECK(normalize_punct(en("a　b")).text == "a b");  // ideographic space
  CHECK(normalize_punct(en("a   b")).text == "a b");
  CHECK(normalize_punct(en("  a b  ")).text == "a b");
  CHECK(normalize_punct(zh("１２３ＡＢ")).text == "123AB");
}

TEST_CASE("normalize_punct is idempotent on random text") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    RawSentence s = en(random_text(rng, 1 + rng.bounded(40)));
    RawSentence once = normalize_punct(s);
    CHECK(normalize_punct(once).text == once.text);
    // length bound: at most 3 output chars per input char
    CHECK(utf8::count(once.text) <= 3 * utf8::count(s.text));
  }
}

TEST_CASE("shipped punct table matches the compiled-in table") {
  std::ifstream in(std::string(MTF_SOURCE_DIR) + "/data/punct_norm.tsv", std::ios::binary);
  REQUIRE(in.good());
  std::vector<std::pair<char32_t, std::string>> from_file;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    char32_t cp = static_cast<char32_t>(std::stoul(line.substr(2, tab - 2), nullptr, 16));
    from_file.emplace_back(cp, line.substr(tab + 1));
  }
  CHECK(from_file == punct_table());
}

TEST_CASE("tokenize_en splits and detaches edge punctuation") {
  CHECK(tokenize_en(en("We are together NOW.")).tokens ==
        std::vector<std::string>{"We", "are", "together", "NOW", "."});
  CHECK(tokenize_en(en("a")).tokens == std::vector<std::string>{"a"});
  CHECK(tokenize_en(en("3.5mg/kg, twice.")).tokens ==
        std::vector<std::string>{"3.5mg/kg", ",", "twice", "."});
  CHECK(tokenize_en(en("\"Hello,\" he said.")).tokens ==
        std::vector<std::string>{"\"", "Hello", ",", "\"", "he", "said", "."});
  CHECK(tokenize_en(en("co-morbid")).tokens == std::vector<std::string>{"co-morbid"});
  // underscores detach, so ordinary text cannot produce a case marker
  CHECK(tokenize_en(en("_U_")).tokens == std::vector<std::string>{"_", "U", "_"});
}

TEST_CASE("segment_zh greedy longest match") {
  std::set<std::string> lex = {"今天", "天气"};
  CHECK(segment_zh(zh("今天天气"), lex).tokens == std::vector<std::string>{"今天", "天气"});
  CHECK(segment_zh(zh("天"), {}).tokens == std::vector<std::string>{"天"});
  // longest match wins over shorter prefix
  std::set<std::string> lex2 = {"天气", "天气预报"};
  CHECK(segment_zh(zh("天气预报"), lex2).tokens == std::vector<std::string>{"天气预报"});
}

TEST_CASE("segment_zh reconstruction invariant") {
  Rng rng(7);
  std::vector<std::string> chars = {"今", "天", "气", "预", "报", "好", "我", "们"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    size_t n = 1 + rng.bounded(12);
    for (size_t i = 0; i < n; ++i) {
      text += chars[rng.bounded(chars.size())];
      if (rng.uniform01() < 0.2) text += " ";
    }
    std::set<std::string> lex;
    for (size_t i = 0; i < 4; ++i)
      lex.insert(chars[rng.bounded(chars.size())] + chars[rng.bounded(chars.size())]);
    std::string joined;
    for (const auto& tok : segment_zh(zh(text), lex).tokens) joined += tok;
    std::string stripped;
    for (char32_t cp : utf8::decode_all(text))
      if (!utf8::is_space(cp)) utf8::append(stripped, cp);
    CHECK(joined == stripped);
  }
}

TEST_CASE("mark_case handles the case taxonomy") {
  CHECK(mark_case(toks({"We", "are", "together", "NOW", "."})).tokens ==
        std::vector<std::string>{"_U_", "we", "are", "together", "_UU_", "now", "."});
  CHECK(mark_case(toks({"we", "are"})).tokens == std::vector<std::string>{"we", "are"});
  CHECK(mark_case(toks({"iPhone"})).tokens == std::vector<std::string>{"iPhone"});
  CHECK(mark_case(toks({"mRNA"})).tokens == std::vector<std::string>{"mRNA"});
  CHECK(mark_case(toks({"I"})).tokens == std::vector<std::string>{"_U_", "i"});
  CHECK(mark_case(toks({"A1"})).tokens == std::vector<std::string>{"_U_", "a1"});
  CHECK(mark_case(toks({"ABC1"})).tokens == std::vector<std::string>{"_UU_", "abc1"});
  CHECK_THROWS_AS((void)mark_case(toks({"_U_", "we"})), Error);
}

TEST_CASE("unmark_case inverts and rejects dangling markers") {
  CHECK(unmark_case(toks({"_U_", "we", "_UU_", "now"})).tokens ==
        std::vector<std::string>{"We", "NOW"});
  CHECK(unmark_case(toks({"we"})).tokens == std::vector<std::string>{"we"});
  CHECK_THROWS_AS((void)unmark_case(toks({"we", "_U_"})), Error);
  CHECK_THROWS_AS((void)unmark_case(toks({"_U_", "_UU_", "we"})), Error);
}

namespace {

TokenSentence random_en_sentence(Rng& rng) {
  static const std::vector<std::string> words = {"we",   "are", "NOW",  "iPhone", "mRNA", "I",
                                                 "The",  "cat", "sat",  "DNA",    "a1",   "A1",
                                                 "hello", ".",  ",",    "x-ray",  "3.5"};
  TokenSentence t;
  t.lang = Lang::EN;
  size_t n = 1 + rng.bounded(12);
  for (size_t i = 0; i < n; ++i) t.tokens.push_back(words[rng.bounded(words.size())]);
  return t;
}

}  // namespace

TEST_CASE("case round-trip on random sentences") {
  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    TokenSentence t = random_en_sentence(rng);
    CHECK(unmark_case(mark_case(t)).tokens == t.tokens);
  }
}

TEST_CASE("marker hygiene: no uppercase outside mixed-case words") {
  Rng rng(321);
  for (int i = 0; i < 1000; ++i) {
    TokenSentence marked = mark_case(random_en_sentence(rng));
    for (const auto& tok : marked.tokens) {
      if (is_case_marker(tok)) continue;
      bool has_upper = false, has_lower = false;
      for (char c : tok) {
        if (c >= 'A' && c <= 'Z') has_upper = true;
        if (c >= 'a' && c <= 'z') has_lower = true;
      }
      if (has_upper) CHECK(has_lower);  // uppercase only in mixed-case words
    }
  }
}

TEST_CASE("detokenize_en attachment rules") {
  CHECK(detokenize_en(toks({"We", "are", "here", "."})).text == "We are here.");
  CHECK(detokenize_en(toks({"hello"})).text == "hello");
  CHECK(detokenize_en(toks({"(", "a", ")", ",", "b"})).text == "(a), b");
  CHECK(detokenize_en(toks({"\"", "Hi", "\"", "ok"})).text == "\"Hi\" ok");
}

TEST_CASE("tokenize/detokenize round-trip on a curated corpus") {
  const std::vector<std::string> corpus = {
      "We are together now.",
      "The dose is 3.5 mg, twice daily.",
      "Results (n = 40) were good.",
      "He said: \"fine\".",
      "Blood pressure fell; symptoms improved!",
      "Is it safe?",
  };
  for (const auto& s : corpus) CHECK(detokenize_en(tokenize_en(en(s))).text == s);
}
