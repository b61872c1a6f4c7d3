#include "mtforge/evalsel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "mtforge/error.hpp"

namespace mtforge::eval {

using json = nlohmann::json;

namespace {

// joins up to 4 tokens with \x1f; cheap n-gram key
std::string ngram_key(const std::vector<std::string>& toks, size_t start, size_t n) {
  std::string key;
  for (size_t i = 0; i < n; ++i) {
    if (i) key.push_back('\x1f');
    key += toks[start + i];
  }
  return key;
}

}  // namespace

BleuScore corpus_bleu(const std::vector<TokenSentence>& hyps,
                      const std::vector<TokenSentence>& refs) {
  if (hyps.size() != refs.size() || hyps.empty())
    raise(Errc::length_mismatch, "corpus_bleu: hypothesis/reference counts differ or empty");

  double matched[4] = {0, 0, 0, 0};
  double total[4] = {0, 0, 0, 0};
  size_t hyp_len = 0, ref_len = 0;

  for (size_t s = 0; s < hyps.size(); ++s) {
    const auto& h = hyps[s].tokens;
    const auto& r = refs[s].tokens;
    hyp_len += h.size();
    ref_len += r.size();
    for (size_t n = 1; n <= 4; ++n) {
      if (h.size() < n) continue;
      std::map<std::string, long> ref_counts;
      if (r.size() >= n)
        for (size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[ngram_key(r, i, n)];
      std::map<std::string, long> hyp_counts;
      for (size_t i = 0; i + n <= h.size(); ++i) ++hyp_counts[ngram_key(h, i, n)];
      for (const auto& [key, count] : hyp_counts) {
        auto it = ref_counts.find(key);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
        total[n - 1] += count;
      }
    }
  }

  BleuScore out;
  out.hyp_len = hyp_len;
  out.ref_len = ref_len;
  out.brevity_penalty =
      (hyp_len >= ref_len || hyp_len == 0)
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));

  bool smooth = false;
  for (int n = 0; n < 4; ++n)
    if (matched[n] <= 0.0) smooth = true;

  double log_sum = 0.0;
  bool zero = false;
  for (int n = 0; n < 4; ++n) {
    double num = matched[n], den = total[n];
    if (smooth && n >= 1) {
      num += 1.0;
      den += 1.0;
    }
    double pn = den > 0.0 ? num / den : 0.0;
    out.precisions[n] = pn;
    if (pn <= 0.0)
      zero = true;
    else
      log_sum += std::log(pn);
  }
  out.score = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / 4.0) * 100.0;
  return out;
}

std::string BleuScore::to_json() const {
  json j;
  j["score"] = score;
  j["precisions"] = {precisions[0], precisions[1], precisions[2], precisions[3]};
  j["brevity_penalty"] = brevity_penalty;
  j["hyp_len"] = hyp_len;
  j["ref_len"] = ref_len;
  return j.dump(2);
}

double self_bleu(const std::vector<TokenSentence>& outputs_i,
                 const std::vector<TokenSentence>& outputs_j) {
  return corpus_bleu(outputs_i, outputs_j).score;
}

SelfBleuMatrix self_bleu_matrix(const std::vector<CandidateModel>& candidates) {
  if (candidates.size() < 2) raise(Errc::invalid_arg, "need >= 2 candidates");
  SelfBleuMatrix m;
  for (const auto& c : candidates) m.ids.push_back(c.id);
  m.cells.assign(candidates.size(), std::vector<double>(candidates.size(), 0.0));
  for (size_t i = 0; i < candidates.size(); ++i)
    for (size_t j = 0; j < candidates.size(); ++j)
      m.cells[i][j] = self_bleu(candidates[i].dev_outputs, candidates[j].dev_outputs);
  return m;
}

std::string SelfBleuMatrix::to_json() const {
  json j;
  j["ids"] = ids;
  j["matrix"] = cells;
  return j.dump(2);
}

SelfBleuMatrix SelfBleuMatrix::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  SelfBleuMatrix m;
  m.ids = j.at("ids").get<std::vector<std::string>>();
  m.cells = j.at("matrix").get<std::vector<std::vector<double>>>();
  if (m.cells.size() != m.ids.size()) raise(Errc::parse, "matrix/ids size mismatch");
  for (const auto& row : m.cells)
    if (row.size() != m.ids.size()) raise(Errc::parse, "matrix is not square");
  return m;
}

double ensemble_objective(const std::vector<double>& dev_bleu, const SelfBleuMatrix& matrix,
                          const std::vector<size_t>& subset, double lambda) {
  if (subset.empty()) return 0.0;
  double bleu_sum = 0.0;
  for (size_t i : subset) bleu_sum += dev_bleu[i];
  double j_val = bleu_sum / static_cast<double>(subset.size());
  if (subset.size() >= 2 && lambda != 0.0) {
    double sim_sum = 0.0;
    for (size_t a : subset)
      for (size_t b : subset)
        if (a != b) sim_sum += matrix.cells[a][b];
    double pairs = static_cast<double>(subset.size() * (subset.size() - 1));
    j_val -= lambda * sim_sum / pairs;
  }
  return j_val;
}

std::vector<size_t> select_ensemble(const std::vector<double>& dev_bleu,
                                    const SelfBleuMatrix& matrix, size_t k, double lambda) {
  const size_t n = dev_bleu.size();
  if (matrix.cells.size() != n) raise(Errc::invalid_arg, "matrix size != candidate count");
  if (k > n) raise(Errc::invalid_arg, "k exceeds candidate count");
  if (k == 0) return {};

  std::vector<size_t> subset;
  std::vector<bool> used(n, false);

  // seed: best dev BLEU, lowest index on ties
  size_t best = 0;
  for (size_t i = 1; i < n; ++i)
    if (dev_bleu[i] > dev_bleu[best]) best = i;
  subset.push_back(best);
  used[best] = true;

  while (subset.size() < k) {
    double best_j = -std::numeric_limits<double>::infinity();
    size_t best_c = n;
    for (size_t c = 0; c < n; ++c) {
      if (used[c]) continue;
      subset.push_back(c);
      double j_val = ensemble_objective(dev_bleu, matrix, subset, lambda);
      subset.pop_back();
      if (j_val > best_j) {
        best_j = j_val;
        best_c = c;
      }
    }
    subset.push_back(best_c);
    used[best_c] = true;
  }
  return subset;
}

TokenSentence ensemble_decode(const std::vector<const model::TranslationModel*>& models,
                              const TokenSentence& src, const model::DecodeOptions& opt) {
  if (models.empty()) raise(Errc::invalid_arg, "ensemble_decode: no models");
  for (const auto* m : models)
    if (!(m->src_vocab == models[0]->src_vocab) || !(m->tgt_vocab == models[0]->tgt_vocab))
      raise(Errc::vocab_mismatch, "ensemble members use different vocabularies");

  std::vector<const model::Params*> members;
  for (const auto* m : models) members.push_back(&m->params);
  std::vector<int> ids = models[0]->src_vocab.encode(src);
  auto hyp = model::beam_decode(members, ids, opt);
  std::vector<int> out;
  for (int id : hyp.tokens)
    if (id != model::Vocab::kEos) out.push_back(id);
  return models[0]->tgt_vocab.decode(out, Lang::EN);
}

}  // namespace mtforge::eval
