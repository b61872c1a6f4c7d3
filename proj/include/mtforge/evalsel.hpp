#pragma once

#include <string>
#include <vector>

#include "mtforge/decode.hpp"
#include "mtforge/lang.hpp"

namespace mtforge::eval {

// Tokenized corpus BLEU-4. Smoothing: when any n-gram match count is zero,
// 1 is added to numerator and denominator of every pn with n >= 2 (p1 is
// never smoothed). Case-sensitive on tokens as given.
struct BleuScore {
  double score = 0.0;  // [0, 100]
  double precisions[4] = {0, 0, 0, 0};
  double brevity_penalty = 1.0;
  size_t hyp_len = 0, ref_len = 0;
  std::string to_json() const;
};

BleuScore corpus_bleu(const std::vector<TokenSentence>& hyps,
                      const std::vector<TokenSentence>& refs);

// BLEU of one system's outputs against another's on the same inputs.
// Asymmetric: rows of the matrix are hypothesis systems, columns are
// reference systems.
double self_bleu(const std::vector<TokenSentence>& outputs_i,
                 const std::vector<TokenSentence>& outputs_j);

struct CandidateModel {
  std::string id;
  std::string checkpoint;  // optional path reference
  std::vector<TokenSentence> dev_outputs;
  double dev_bleu = 0.0;
};

struct SelfBleuMatrix {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> cells;  // cells[i][j] = BLEU(hyp=i, ref=j)

  std::string to_json() const;
  static SelfBleuMatrix from_json(const std::string& json_text);
};

SelfBleuMatrix self_bleu_matrix(const std::vector<CandidateModel>& candidates);

// Greedy maximization of
//   J(S) = mean dev_bleu(S) - lambda * mean over ordered pairs of SelfBLEU
// starting from the best single candidate; ties break toward the lower
// index. lambda = 0 reduces to top-k by dev_bleu.
std::vector<size_t> select_ensemble(const std::vector<double>& dev_bleu,
                                    const SelfBleuMatrix& matrix, size_t k, double lambda);

double ensemble_objective(const std::vector<double>& dev_bleu, const SelfBleuMatrix& matrix,
                          const std::vector<size_t>& subset, double lambda);

// Beam search over the arithmetic mean of member distributions. Members
// must share both vocabularies.
TokenSentence ensemble_decode(const std::vector<const model::TranslationModel*>& models,
                              const TokenSentence& src, const model::DecodeOptions& opt = {});

}  // namespace mtforge::eval
