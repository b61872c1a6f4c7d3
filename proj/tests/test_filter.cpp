#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "mtforge/error.hpp"
#include "mtforge/filter.hpp"
#include "mtforge/rng.hpp"

using namespace mtforge;
using namespace mtforge::filter;

namespace {

SentencePair pair_of(const std::vector<std::string>& src, const std::vector<std::string>& tgt) {
  SentencePair p;
  p.src = {src, Lang::ZH};
  p.tgt = {tgt, Lang::EN};
  return p;
}

// Independent EM oracle kept deliberately separate from the library path:
// dense maps, no NULL-row sharing, direct translation of the update rule.
struct OracleModel1 {
  std::map<std::pair<std::string, std::string>, double> t;

  static OracleModel1 train(const Corpus& corpus, int iterations) {
    std::set<std::string> tgt_vocab;
    for (const auto& p : corpus)
      for (const auto& f : p.tgt.tokens) tgt_vocab.insert(f);
    OracleModel1 m;
    for (const auto& p : corpus) {
      std::vector<std::string> srcs = p.src.tokens;
      srcs.push_back(kNullToken);
      for (const auto& e : srcs)
        for (const auto& f : p.tgt.tokens)
          m.t[{e, f}] = 1.0 / static_cast<double>(tgt_vocab.size());
    }
    for (int it = 0; it < iterations; ++it) {
      std::map<std::pair<std::string, std::string>, double> count;
      std::map<std::string, double> total;
      for (const auto& p : corpus) {
        std::vector<std::string> srcs = p.src.tokens;
        srcs.push_back(kNullToken);
        for (const auto& f : p.tgt.tokens) {
          double denom = 0;
          for (const auto& e : srcs) denom += m.t[{e, f}];
          for (const auto& e : srcs) {
            double c = m.t[{e, f}] / denom;
            count[{e, f}] += c;
            total[e] += c;
          }
        }
      }
      for (auto& [key, prob] : m.t) prob = count[key] / total[key.first];
    }
    return m;
  }
};

}  // namespace

TEST_CASE("filter_identical") {
  CHECK_FALSE(filter_identical(pair_of({"abc"}, {"abc"})));
  CHECK(filter_identical(pair_of({"今天"}, {"today"})));
  CHECK(filter_identical(pair_of({"a", "b"}, {"a", "b", "c"})));
}

TEST_CASE("filter_langid") {
  CHECK_FALSE(filter_langid(pair_of({"this", "is", "english"}, {"..."})));
  CHECK(filter_langid(pair_of({"今天天气好"}, {"nice", "weather"})));
  CHECK_FALSE(filter_langid(pair_of({"...", "!!"}, {"nice"})));  // only punctuation
}

TEST_CASE("filter_len_ratio") {
  SentencePair p;
  p.src.tokens.assign(10, "x");
  p.tgt.tokens.assign(31, "y");
  CHECK_FALSE(filter_len_ratio(p, 3.0));
  p.src.tokens.assign(1, "x");
  p.tgt.tokens.assign(3, "y");
  CHECK(filter_len_ratio(p, 3.0));  // boundary stays
  p.src.tokens.assign(31, "x");
  p.tgt.tokens.assign(10, "y");
  CHECK_FALSE(filter_len_ratio(p, 3.0));  // symmetric
}

TEST_CASE("filter_length") {
  SentencePair p = pair_of({"好"}, {"ok"});
  p.tgt.tokens.assign(151, "w");
  CHECK_FALSE(filter_length(p, 150, 40));
  p = pair_of({"好"}, {std::string(41, 'x')});
  CHECK_FALSE(filter_length(p, 150, 40));
  p = pair_of({"好"}, {"ok"});
  p.tgt.tokens.assign(150, std::string(40, 'x'));
  CHECK(filter_length(p, 150, 40));
}

TEST_CASE("filter_zh_in_en") {
  CHECK_FALSE(filter_zh_in_en(pair_of({"x"}, {"dose", "每日", "once"})));
  CHECK(filter_zh_in_en(pair_of({"x"}, {"dose", "once", "daily"})));
  CHECK(filter_zh_in_en(pair_of({"x"}, {"α-blocker"})));
}

TEST_CASE("model1 training matches the independent EM oracle") {
  Corpus corpus = {pair_of({"a"}, {"x"}), pair_of({"a", "b"}, {"x", "y"}),
                   pair_of({"b"}, {"y"})};
  auto table = train_model1(corpus, 10);
  auto oracle = OracleModel1::train(corpus, 10);
  for (const auto& [key, prob] : oracle.t)
    CHECK(table.prob(key.first, key.second) == doctest::Approx(prob).epsilon(1e-12));
  CHECK(table.prob("a", "x") > 0.9);
}

TEST_CASE("model1 single pair first step") {
  auto table = train_model1({pair_of({"a"}, {"x"})}, 1);
  CHECK(table.prob("a", "x") >= 0.5);
}

TEST_CASE("model1 log-likelihood is non-decreasing") {
  Rng rng(5);
  std::vector<std::string> src_words = {"一", "二", "三", "四", "五"};
  std::vector<std::string> tgt_words = {"one", "two", "three", "four", "five"};
  for (int trial = 0; trial < 3; ++trial) {
    Corpus corpus;
    for (int i = 0; i < 15; ++i) {
      std::vector<std::string> s, t;
      size_t n = 1 + rng.bounded(4);
      for (size_t k = 0; k < n; ++k) {
        s.push_back(src_words[rng.bounded(src_words.size())]);
        t.push_back(tgt_words[rng.bounded(tgt_words.size())]);
      }
      corpus.push_back(pair_of(s, t));
    }
    auto table = train_model1(corpus, 20);
    REQUIRE(table.log_likelihood.size() == 20);
    for (size_t i = 1; i < table.log_likelihood.size(); ++i)
      CHECK(table.log_likelihood[i] >= table.log_likelihood[i - 1] - 1e-9);
    // rows sum to 1 after training
    for (const auto& [e, row] : table.t) {
      double sum = 0;
      for (const auto& [f, prob] : row) sum += prob;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("align_score orders matched above shuffled pairs") {
  Corpus corpus = {pair_of({"a"}, {"x"}), pair_of({"a", "b"}, {"x", "y"}),
                   pair_of({"b"}, {"y"})};
  auto table = train_model1(corpus, 10);
  double matched = align_score(pair_of({"a", "b"}, {"x", "y"}), table);
  double mismatched = align_score(pair_of({"a", "b"}, {"y", "y"}), table);
  CHECK(matched > mismatched);
  // bag-of-words: target permutation leaves the score unchanged
  CHECK(align_score(pair_of({"a", "b"}, {"y", "x"}), table) == doctest::Approx(matched));
}

TEST_CASE("filter_by_align drops exactly the lowest fraction") {
  Corpus corpus = {pair_of({"a"}, {"x"}), pair_of({"a", "b"}, {"x", "y"}),
                   pair_of({"b"}, {"y"})};
  auto table = train_model1(corpus, 10);

  Corpus ten;
  for (int i = 0; i < 8; ++i) ten.push_back(pair_of({"a"}, {"x"}));
  ten.push_back(pair_of({"a"}, {"y"}));  // low score
  ten.push_back(pair_of({"b"}, {"x"}));  // low score
  auto [kept, dropped] = filter_by_align(ten, table, 0.2);
  REQUIRE(dropped.size() == 2);
  CHECK(kept.size() == 8);
  // the two mismatched pairs score lowest
  CHECK(dropped[0].tgt.tokens == std::vector<std::string>{"y"});
  CHECK(dropped[1].tgt.tokens == std::vector<std::string>{"x"});

  auto [all_kept, none] = filter_by_align(ten, table, 0.0);
  CHECK(none.empty());
  CHECK(all_kept.size() == ten.size());

  // equal scores everywhere: the last floor(n*f) in input order go
  Corpus same(10, pair_of({"a"}, {"x"}));
  auto [k2, d2] = filter_by_align(same, table, 0.3);
  CHECK(d2.size() == 3);
  CHECK(k2.size() == 7);
}

TEST_CASE("run_filters attributes drops to the first triggering rule") {
  SentencePair identical = pair_of({"x"}, {"x"});
  SentencePair ratio = pair_of({"a", "a"}, {"b"});
  ratio.tgt.tokens.assign(9, "b");  // ratio 4.5

  // violates both langid and length: attribution goes to the earlier rule
  SentencePair langid_and_length = pair_of({"english", "words"}, {"ok"});
  langid_and_length.tgt.tokens.assign(151, "ok");

  FilterRules rules;
  rules.langid = false;  // let the ratio pair through language id
  auto [kept, report] = run_filters({identical, ratio}, rules);
  CHECK(report.drops.at("identical") == 1);
  CHECK(report.drops.at("len_ratio") == 1);
  CHECK(report.kept == 0);
  CHECK(report.total == 2);

  FilterRules all;
  auto [kept2, report2] = run_filters({langid_and_length}, all);
  CHECK(report2.drops.at("langid") == 1);
  CHECK(report2.drops.at("length") == 0);
  CHECK(kept2.empty());
}

TEST_CASE("run_filters on a clean corpus keeps everything and is idempotent") {
  Corpus corpus = {pair_of({"今天", "天气"}, {"nice", "weather"}),
                   pair_of({"病人", "服用"}, {"patient", "took", "it"})};
  FilterRules rules;
  auto [kept, report] = run_filters(corpus, rules);
  CHECK(kept.size() == corpus.size());
  CHECK(report.kept == corpus.size());
  for (const auto& [rule, count] : report.drops) CHECK(count == 0);

  auto [kept2, report2] = run_filters(kept, rules);
  CHECK(kept2.size() == kept.size());

  size_t drop_sum = 0;
  for (const auto& [rule, count] : report.drops) drop_sum += count;
  CHECK(report.kept + drop_sum == report.total);
}

TEST_CASE("model1 table save/load round trip") {
  Corpus corpus = {pair_of({"a"}, {"x"}), pair_of({"b"}, {"y"})};
  auto table = train_model1(corpus, 3);
  auto path = (std::filesystem::temp_directory_path() / "m1_test.tsv").string();
  table.save(path);
  auto loaded = Model1Table::load(path);
  CHECK(loaded.prob("a", "x") == doctest::Approx(table.prob("a", "x")).epsilon(1e-15));
  std::filesystem::remove(path);
}

TEST_CASE("sentence alignment: equal documents give 1-1 beads") {
  std::vector<RawSentence> src = {{"今天天气很好", Lang::ZH},
                                  {"病人已经出院", Lang::ZH},
                                  {"医生建议休息", Lang::ZH}};
  std::vector<RawSentence> tgt = {{"the weather", Lang::EN},
                                  {"patient left", Lang::EN},
                                  {"doctor rest", Lang::EN}};
  auto beads = align_beads(src, tgt);
  REQUIRE(beads.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(beads[i].src == std::vector<size_t>{i});
    CHECK(beads[i].tgt == std::vector<size_t>{i});
  }
  auto pairs = sentence_align(src, tgt);
  CHECK(pairs.size() == 3);
}

TEST_CASE("sentence alignment: an extra short target sentence becomes a 0-1 bead") {
  std::vector<RawSentence> src = {{"第一句话在这里有一些内容", Lang::ZH},
                                  {"第二句话也有类似的长度哦", Lang::ZH}};
  std::vector<RawSentence> tgt = {{"first sentence with words", Lang::EN},
                                  {"!", Lang::EN},
                                  {"second sentence same size!", Lang::EN}};
  auto beads = align_beads(src, tgt);
  size_t zero_one = 0, one_one = 0;
  for (const auto& b : beads) {
    if (b.src.empty() && b.tgt.size() == 1) ++zero_one;
    if (b.src.size() == 1 && b.tgt.size() == 1) ++one_one;
  }
  CHECK(zero_one == 1);
  CHECK(one_one == 2);
  CHECK(sentence_align(src, tgt).size() == 2);
}

TEST_CASE("sentence alignment output is monotone") {
  std::vector<RawSentence> src, tgt;
  Rng rng(9);
  for (int i = 0; i < 8; ++i) {
    size_t len = 4 + rng.bounded(20);
    src.push_back({std::string(len, 'x'), Lang::ZH});
    tgt.push_back({std::string(len + rng.bounded(4), 'y'), Lang::EN});
  }
  auto beads = align_beads(src, tgt);
  size_t last_src = 0, last_tgt = 0;
  bool first = true;
  for (const auto& b : beads) {
    for (size_t s : b.src) {
      if (!first) CHECK(s >= last_src);
      last_src = s;
    }
    for (size_t t : b.tgt) {
      CHECK((first || t >= last_tgt));
      last_tgt = t;
    }
    first = false;
  }

  CHECK_THROWS_AS((void)align_beads({}, tgt), Error);
}

TEST_CASE("single sentence each side aligns 1-1") {
  auto pairs = sentence_align({{"你好世界", Lang::ZH}}, {{"hello world", Lang::EN}});
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].tgt.tokens == std::vector<std::string>{"hello", "world"});
}
