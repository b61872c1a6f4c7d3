#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtforge/lang.hpp"

namespace mtforge::filter {

// ---------------------------------------------------------------- rules

// Individual predicates return true when the pair should be KEPT.
bool filter_identical(const SentencePair& p);
bool filter_langid(const SentencePair& p);
bool filter_len_ratio(const SentencePair& p, double max_ratio = 3.0);
bool filter_length(const SentencePair& p, size_t max_tokens = 150, size_t max_word_chars = 40);
bool filter_zh_in_en(const SentencePair& p);

struct FilterReport {
  std::map<std::string, size_t> drops;  // first-triggering rule -> count
  size_t kept = 0;
  size_t total = 0;
  std::string to_json() const;
};

// --------------------------------------------------------- IBM Model 1

inline constexpr const char* kNullToken = "<null>";

// Translation table t(tgt | src) with a NULL source token. Each source
// row sums to 1 over the target vocabulary.
struct Model1Table {
  std::unordered_map<std::string, std::unordered_map<std::string, double>> t;
  std::vector<double> log_likelihood;  // one entry per EM iteration

  double prob(const std::string& src_tok, const std::string& tgt_tok) const;
  void save(const std::string& path) const;
  static Model1Table load(const std::string& path);
};

// EM with uniform initialization. log_likelihood[k] is the corpus
// log-likelihood under the parameters entering iteration k, so the vector
// is non-decreasing. Throws empty_corpus.
Model1Table train_model1(const Corpus& corpus, int iterations);

// Length-normalized log P(tgt|src): mean over target tokens of
// log( mean over source tokens + NULL of t(tgt_tok | src_tok) ).
// Unseen entries contribute a 1e-12 floor.
double align_score(const SentencePair& p, const Model1Table& m);

// Drops the floor(n * drop_fraction) lowest-scoring pairs. On ties the
// later pair in input order is dropped first, so earlier pairs survive.
std::pair<Corpus, Corpus> filter_by_align(const Corpus& corpus, const Model1Table& m,
                                          double drop_fraction);

// ----------------------------------------------------------- pipeline

struct FilterRules {
  bool identical = true;
  bool langid = true;
  bool len_ratio = true;
  double max_ratio = 3.0;
  bool length = true;
  size_t max_tokens = 150;
  size_t max_word_chars = 40;
  bool zh_in_en = true;
  double align_drop_frac = 0.0;  // 0 disables the alignment filter

  static FilterRules from_json(const std::string& json_text);
};

// Applies the rules in their listed order, then the Chinese-in-English
// rule, then the alignment filter; each dropped pair is attributed to the
// first rule that rejected it. `model` may be null when align_drop_frac
// is 0.
std::pair<Corpus, FilterReport> run_filters(const Corpus& corpus, const FilterRules& rules,
                                            const Model1Table* model = nullptr);

// ---------------------------------------------- length-based alignment

struct Bead {
  std::vector<size_t> src;  // indices into the source document
  std::vector<size_t> tgt;
};

// Dynamic program over {1-1, 1-0, 0-1, 2-1, 1-2} beads with the classic
// length-ratio Gaussian cost (c = 1, s^2 = 6.8, character counts).
std::vector<Bead> align_beads(const std::vector<RawSentence>& src_doc,
                              const std::vector<RawSentence>& tgt_doc);

// Keeps only the 1-1 beads and materializes them as sentence pairs
// (sides whitespace-split; ZH text is usually one token per sentence at
// this stage, downstream segmentation splits it further).
Corpus sentence_align(const std::vector<RawSentence>& src_doc,
                      const std::vector<RawSentence>& tgt_doc, Domain domain = Domain::BIO);

}  // namespace mtforge::filter
