#include <doctest.h>

#include <filesystem>
#include <set>

#include "mtforge/error.hpp"
#include "mtforge/rng.hpp"
#include "mtforge/subword.hpp"

using namespace mtforge;
using namespace mtforge::bpe;

namespace {

std::vector<TokenSentence> word_corpus(const std::vector<std::pair<std::string, int>>& freqs) {
  std::vector<TokenSentence> corpus;
  for (const auto& [word, n] : freqs)
    for (int i = 0; i < n; ++i) corpus.push_back({{word}, Lang::EN});
  return corpus;
}

}  // namespace

TEST_CASE("bpe_learn reproduces the hand-computed merge sequence") {
  // pairs over {low x5, lower x2}: (l,o)=7 ties (o,w)=7, lexicographic
  // tie-break picks (l,o); after that (lo,w)=7 dominates.
  auto model = bpe_learn(word_corpus({{"low", 5}, {"lower", 2}}), 2, {});
  REQUIRE(model.merges.size() == 2);
  CHECK(model.merges[0] == std::make_pair(std::string("l"), std::string("o")));
  CHECK(model.merges[1] == std::make_pair(std::string("lo"), std::string("w")));
}

TEST_CASE("bpe_learn stops early when pairs run out") {
  auto model = bpe_learn(word_corpus({{"ab", 3}}), 50, {});
  CHECK(model.merges.size() < 50);
  CHECK(model.merges.size() == 1);  // only (a,b)
}

TEST_CASE("bpe_learn on single-character words learns nothing") {
  auto model = bpe_learn(word_corpus({{"a", 5}, {"b", 3}, {"c", 9}}), 10, {});
  CHECK(model.merges.empty());
}

TEST_CASE("bpe_learn is deterministic") {
  auto corpus = word_corpus({{"low", 5}, {"lower", 2}, {"newest", 3}, {"widest", 3}});
  auto a = bpe_learn(corpus, 20, {});
  auto b = bpe_learn(corpus, 20, {});
  CHECK(a.merges == b.merges);
}

TEST_CASE("bpe_learn throws on empty corpus") {
  CHECK_THROWS_AS((void)bpe_learn({}, 5, {}), Error);
}

TEST_CASE("bpe_apply replays merges and marks continuations") {
  BpeModel m;
  m.merges = {{"l", "o"}, {"lo", "w"}};
  CHECK(bpe_apply({{"lower"}, Lang::EN}, m).tokens ==
        std::vector<std::string>{"low@@", "e@@", "r"});
  CHECK(bpe_apply({{"low"}, Lang::EN}, m).tokens == std::vector<std::string>{"low"});

  m.protected_tokens = {"_UU_"};
  CHECK(bpe_apply({{"_UU_"}, Lang::EN}, m).tokens == std::vector<std::string>{"_UU_"});
}

TEST_CASE("bpe_undo joins pieces and rejects dangling markers") {
  CHECK(bpe_undo({{"low@@", "e@@", "r"}, Lang::EN}).tokens == std::vector<std::string>{"lower"});
  CHECK(bpe_undo({{"hello"}, Lang::EN}).tokens == std::vector<std::string>{"hello"});
  CHECK_THROWS_AS((void)bpe_undo({{"low@@"}, Lang::EN}), Error);
}

TEST_CASE("round-trip: undo after apply is the identity") {
  Rng rng(42);
  std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "今", "天"};
  std::vector<TokenSentence> corpus;
  for (int s = 0; s < 60; ++s) {
    TokenSentence t;
    t.lang = Lang::EN;
    size_t n = 1 + rng.bounded(8);
    for (size_t i = 0; i < n; ++i) {
      std::string w;
      size_t len = 1 + rng.bounded(6);
      for (size_t k = 0; k < len; ++k) w += alphabet[rng.bounded(alphabet.size())];
      t.tokens.push_back(w);
    }
    corpus.push_back(t);
  }
  auto model = bpe_learn(corpus, 40, {"<BT>"});
  for (const auto& t : corpus) CHECK(bpe_undo(bpe_apply(t, model)).tokens == t.tokens);
}

TEST_CASE("piece vocabulary grows by at most one per merge") {
  auto corpus = word_corpus({{"aaab", 4}, {"aab", 4}, {"abab", 2}});
  std::set<std::string> base;
  for (const auto& s : corpus)
    for (const auto& w : s.tokens)
      for (char c : w) base.insert(std::string(1, c));
  for (size_t k = 1; k <= 6; ++k) {
    auto model = bpe_learn(corpus, k, {});
    std::set<std::string> pieces;
    for (const auto& s : corpus)
      for (const auto& piece : bpe_apply(s, model).tokens) {
        std::string bare = piece;
        if (bare.size() > 2 && bare.substr(bare.size() - 2) == "@@")
          bare.resize(bare.size() - 2);
        pieces.insert(bare);
      }
    CHECK(pieces.size() <= base.size() + model.merges.size());
  }
}

TEST_CASE("protected tokens never appear inside merge rules") {
  std::set<std::string> prot = {"<BT>", "ab"};
  auto model = bpe_learn(word_corpus({{"ab", 9}, {"abc", 5}, {"<BT>", 7}}), 10, prot);
  for (const auto& [l, r] : model.merges) CHECK_FALSE(prot.count(l + r));
}

TEST_CASE("model file save/load round trip") {
  auto model = bpe_learn(word_corpus({{"low", 5}, {"lower", 2}}), 2, {});
  auto path = (std::filesystem::temp_directory_path() / "bpe_test.model").string();
  model.save(path);
  auto loaded = BpeModel::load(path);
  CHECK(loaded.merges == model.merges);
  CHECK(loaded.n_ops == model.n_ops);
  std::filesystem::remove(path);
}
