#include "mtforge/filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtforge/error.hpp"
#include "mtforge/utf8.hpp"

namespace mtforge::filter {

using json = nlohmann::json;

// ---------------------------------------------------------------- rules

bool filter_identical(const SentencePair& p) { return p.src.tokens != p.tgt.tokens; }

bool filter_langid(const SentencePair& p) {
  size_t src_han = 0, src_total = 0;
  for (const auto& tok : p.src.tokens)
    for (char32_t cp : utf8::decode_all(tok)) {
      if (utf8::is_punct(cp)) continue;
      ++src_total;
      if (utf8::is_han(cp)) ++src_han;
    }
  if (src_total == 0) return false;  // nothing but punctuation
  if (src_han * 10 < src_total * 3) return false;

  size_t tgt_ascii = 0, tgt_total = 0;
  for (const auto& tok : p.tgt.tokens)
    for (char32_t cp : utf8::decode_all(tok)) {
      ++tgt_total;
      if (utf8::is_ascii_letter(cp)) ++tgt_ascii;
    }
  if (tgt_total == 0) return false;
  return tgt_ascii * 10 >= tgt_total * 3;
}

bool filter_len_ratio(const SentencePair& p, double max_ratio) {
  double a = static_cast<double>(p.src.tokens.size());
  double b = static_cast<double>(p.tgt.tokens.size());
  if (a == 0 || b == 0) return false;
  return std::max(a, b) / std::min(a, b) <= max_ratio;
}

bool filter_length(const SentencePair& p, size_t max_tokens, size_t max_word_chars) {
  if (p.src.tokens.size() > max_tokens || p.tgt.tokens.size() > max_tokens) return false;
  for (const auto* side : {&p.src, &p.tgt})
    for (const auto& tok : side->tokens)
      if (utf8::count(tok) > max_word_chars) return false;
  return true;
}

bool filter_zh_in_en(const SentencePair& p) {
  for (const auto& tok : p.tgt.tokens)
    for (char32_t cp : utf8::decode_all(tok))
      if (utf8::is_han(cp)) return false;
  return true;
}

std::string FilterReport::to_json() const {
  json j;
  j["total"] = total;
  j["kept"] = kept;
  j["drops"] = json::object();
  for (const auto& [rule, count] : drops) j["drops"][rule] = count;
  return j.dump(2);
}

// --------------------------------------------------------- IBM Model 1

double Model1Table::prob(const std::string& src_tok, const std::string& tgt_tok) const {
  auto row = t.find(src_tok);
  if (row == t.end()) return 0.0;
  auto cell = row->second.find(tgt_tok);
  return cell == row->second.end() ? 0.0 : cell->second;
}

namespace {

// log-likelihood of the corpus under the current table:
//   sum over pairs, target tokens of log( (1/(l+1)) * sum_src t(f|e) )
double corpus_ll(const Corpus& corpus, const Model1Table& m) {
  double ll = 0.0;
  for (const auto& p : corpus) {
    double denom_len = static_cast<double>(p.src.tokens.size()) + 1.0;
    for (const auto& f : p.tgt.tokens) {
      double sum = m.prob(kNullToken, f);
      for (const auto& e : p.src.tokens) sum += m.prob(e, f);
      ll += std::log(std::max(sum / denom_len, 1e-300));
    }
  }
  return ll;
}

}  // namespace

Model1Table train_model1(const Corpus& corpus, int iterations) {
  if (corpus.empty()) raise(Errc::empty_corpus, "train_model1: empty corpus");
  if (iterations < 1) raise(Errc::invalid_arg, "train_model1: iterations must be >= 1");

  std::set<std::string> tgt_vocab;
  std::set<std::string> src_vocab{kNullToken};
  for (const auto& p : corpus) {
    for (const auto& e : p.src.tokens) src_vocab.insert(e);
    for (const auto& f : p.tgt.tokens) tgt_vocab.insert(f);
  }

  Model1Table m;
  double uniform = 1.0 / static_cast<double>(tgt_vocab.size());
  // initialize rows only for co-occurring entries plus the NULL row
  for (const auto& p : corpus) {
    for (const auto& f : p.tgt.tokens) {
      m.t[kNullToken][f] = uniform;
      for (const auto& e : p.src.tokens) m.t[e][f] = uniform;
    }
  }

  for (int it = 0; it < iterations; ++it) {
    m.log_likelihood.push_back(corpus_ll(corpus, m));

    std::unordered_map<std::string, std::unordered_map<std::string, double>> count;
    std::unordered_map<std::string, double> total;
    for (const auto& p : corpus) {
      for (const auto& f : p.tgt.tokens) {
        double denom = m.t[kNullToken][f];
        for (const auto& e : p.src.tokens) denom += m.t[e][f];
        if (denom <= 0) continue;
        double c0 = m.t[kNullToken][f] / denom;
        count[kNullToken][f] += c0;
        total[kNullToken] += c0;
        for (const auto& e : p.src.tokens) {
          double c = m.t[e][f] / denom;
          count[e][f] += c;
          total[e] += c;
        }
      }
    }
    for (auto& [e, row] : m.t) {
      double z = total[e];
      if (z <= 0) continue;
      for (auto& [f, prob] : row) prob = count[e][f] / z;
    }
  }
  return m;
}

double align_score(const SentencePair& p, const Model1Table& m) {
  if (p.tgt.tokens.empty()) return -27.631021115928547;  // log(1e-12)
  double denom_len = static_cast<double>(p.src.tokens.size()) + 1.0;
  double score = 0.0;
  for (const auto& f : p.tgt.tokens) {
    double sum = m.prob(kNullToken, f);
    for (const auto& e : p.src.tokens) sum += m.prob(e, f);
    score += std::log(std::max(sum / denom_len, 1e-12));
  }
  return score / static_cast<double>(p.tgt.tokens.size());
}

std::pair<Corpus, Corpus> filter_by_align(const Corpus& corpus, const Model1Table& m,
                                          double drop_fraction) {
  if (drop_fraction < 0.0 || drop_fraction >= 1.0)
    raise(Errc::invalid_arg, "drop_fraction must be in [0, 1)");
  size_t n_drop = static_cast<size_t>(static_cast<double>(corpus.size()) * drop_fraction);
  if (n_drop == 0) return {corpus, {}};

  std::vector<double> scores(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) scores[i] = align_score(corpus[i], m);

  // ascending score; on equal scores the later pair sorts first (dropped)
  std::vector<size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a > b;
  });

  std::vector<bool> dropped(corpus.size(), false);
  for (size_t k = 0; k < n_drop; ++k) dropped[order[k]] = true;

  Corpus kept, out_dropped;
  for (size_t i = 0; i < corpus.size(); ++i)
    (dropped[i] ? out_dropped : kept).push_back(corpus[i]);
  return {kept, out_dropped};
}

// ----------------------------------------------------------- pipeline

FilterRules FilterRules::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  FilterRules r;
  r.identical = j.value("identical", r.identical);
  r.langid = j.value("langid", r.langid);
  r.len_ratio = j.value("len_ratio", r.len_ratio);
  r.max_ratio = j.value("max_ratio", r.max_ratio);
  r.length = j.value("length", r.length);
  r.max_tokens = j.value("max_tokens", r.max_tokens);
  r.max_word_chars = j.value("max_word_chars", r.max_word_chars);
  r.zh_in_en = j.value("zh_in_en", r.zh_in_en);
  r.align_drop_frac = j.value("align_drop_frac", r.align_drop_frac);
  return r;
}

std::pair<Corpus, FilterReport> run_filters(const Corpus& corpus, const FilterRules& rules,
                                            const Model1Table* model) {
  FilterReport report;
  report.total = corpus.size();
  if (rules.identical) report.drops["identical"] = 0;
  if (rules.langid) report.drops["langid"] = 0;
  if (rules.len_ratio) report.drops["len_ratio"] = 0;
  if (rules.length) report.drops["length"] = 0;
  if (rules.zh_in_en) report.drops["zh_in_en"] = 0;
  if (rules.align_drop_frac > 0.0 && model != nullptr) report.drops["align"] = 0;

  Corpus survivors;
  for (const auto& p : corpus) {
    if (rules.identical && !filter_identical(p)) {
      ++report.drops["identical"];
    } else if (rules.langid && !filter_langid(p)) {
      ++report.drops["langid"];
    } else if (rules.len_ratio && !filter_len_ratio(p, rules.max_ratio)) {
      ++report.drops["len_ratio"];
    } else if (rules.length && !filter_length(p, rules.max_tokens, rules.max_word_chars)) {
      ++report.drops["length"];
    } else if (rules.zh_in_en && !filter_zh_in_en(p)) {
      ++report.drops["zh_in_en"];
    } else {
      survivors.push_back(p);
    }
  }

  if (rules.align_drop_frac > 0.0 && model != nullptr && !survivors.empty()) {
    auto [kept, dropped] = filter_by_align(survivors, *model, rules.align_drop_frac);
    report.drops["align"] += dropped.size();
    survivors = std::move(kept);
  }

  report.kept = survivors.size();
  return {std::move(survivors), std::move(report)};
}

// ---------------------------------------------- length-based alignment

namespace {

// Classic length-ratio cost: delta = (l2 - l1) / sqrt((l1 + l2) / 2 * s2),
// cost = -log of the two-sided Gaussian tail = -log erfc(|delta| / sqrt 2).
constexpr double kS2 = 6.8;

double gauss_cost(size_t l1, size_t l2) {
  if (l1 == 0 && l2 == 0) return 0.0;
  double mean = (static_cast<double>(l1) + static_cast<double>(l2)) / 2.0;
  double delta = (static_cast<double>(l2) - static_cast<double>(l1)) / std::sqrt(mean * kS2);
  double tail = std::erfc(std::fabs(delta) / std::sqrt(2.0));
  return -std::log(std::max(tail, 1e-300));
}

struct BeadType {
  size_t ds, dt;
  double type_cost;  // -log prior
};

// Priors follow the classic category frequencies; 2-2 beads are not used.
const BeadType kBeadTypes[] = {
    {1, 1, -std::log(0.89)},
    {1, 0, -std::log(0.0099 / 2)},
    {0, 1, -std::log(0.0099 / 2)},
    {2, 1, -std::log(0.089 / 2)},
    {1, 2, -std::log(0.089 / 2)},
};

}  // namespace

std::vector<Bead> align_beads(const std::vector<RawSentence>& src_doc,
                              const std::vector<RawSentence>& tgt_doc) {
  if (src_doc.empty() || tgt_doc.empty())
    raise(Errc::invalid_arg, "align_beads: empty document");

  const size_t n = src_doc.size(), m = tgt_doc.size();
  std::vector<size_t> src_len(n), tgt_len(m);
  for (size_t i = 0; i < n; ++i) src_len[i] = utf8::count(src_doc[i].text);
  for (size_t j = 0; j < m; ++j) tgt_len[j] = utf8::count(tgt_doc[j].text);

  constexpr double kInf = 1e30;
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(m + 1, kInf));
  std::vector<std::vector<int>> back(n + 1, std::vector<int>(m + 1, -1));
  cost[0][0] = 0.0;

  for (size_t i = 0; i <= n; ++i) {
    for (size_t j = 0; j <= m; ++j) {
      if (cost[i][j] >= kInf) continue;
      for (int b = 0; b < 5; ++b) {
        const auto& bt = kBeadTypes[b];
        size_t ni = i + bt.ds, nj = j + bt.dt;
        if (ni > n || nj > m) continue;
        size_t l1 = 0, l2 = 0;
        for (size_t k = i; k < ni; ++k) l1 += src_len[k];
        for (size_t k = j; k < nj; ++k) l2 += tgt_len[k];
        double c = cost[i][j] + bt.type_cost + gauss_cost(l1, l2);
        if (c < cost[ni][nj]) {
          cost[ni][nj] = c;
          back[ni][nj] = b;
        }
      }
    }
  }

  std::vector<Bead> beads;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    int b = back[i][j];
    if (b < 0) raise(Errc::internal, "align_beads: no path");
    const auto& bt = kBeadTypes[b];
    Bead bead;
    for (size_t k = i - bt.ds; k < i; ++k) bead.src.push_back(k);
    for (size_t k = j - bt.dt; k < j; ++k) bead.tgt.push_back(k);
    beads.push_back(std::move(bead));
    i -= bt.ds;
    j -= bt.dt;
  }
  std::reverse(beads.begin(), beads.end());
  return beads;
}

Corpus sentence_align(const std::vector<RawSentence>& src_doc,
                      const std::vector<RawSentence>& tgt_doc, Domain domain) {
  Corpus out;
  for (const auto& bead : align_beads(src_doc, tgt_doc)) {
    if (bead.src.size() != 1 || bead.tgt.size() != 1) continue;
    SentencePair p;
    p.src = split_tokens(src_doc[bead.src[0]].text, Lang::ZH);
    p.tgt = split_tokens(tgt_doc[bead.tgt[0]].text, Lang::EN);
    p.origin = Origin::REAL;
    p.domain = domain;
    if (p.src.tokens.empty() || p.tgt.tokens.empty()) continue;
    out.push_back(std::move(p));
  }
  return out;
}

// ------------------------------------------------------- serialization

void Model1Table::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io, "cannot write model1 table: " + path);
  out << "#model1 v1 " << log_likelihood.size() << "\n";
  out.precision(17);
  std::vector<std::string> src_keys;
  src_keys.reserve(t.size());
  for (const auto& [e, _] : t) src_keys.push_back(e);
  std::sort(src_keys.begin(), src_keys.end());
  for (const auto& e : src_keys) {
    std::vector<std::string> tgt_keys;
    const auto& row = t.at(e);
    for (const auto& [f, _] : row) tgt_keys.push_back(f);
    std::sort(tgt_keys.begin(), tgt_keys.end());
    for (const auto& f : tgt_keys) out << e << '\t' << f << '\t' << row.at(f) << "\n";
  }
}

Model1Table Model1Table::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io, "cannot open model1 table: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#model1 v1", 0) != 0)
    raise(Errc::parse, "bad model1 header");
  Model1Table m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      raise(Errc::parse, "bad model1 line: " + line);
    m.t[line.substr(0, t1)][line.substr(t1 + 1, t2 - t1 - 1)] = std::stod(line.substr(t2 + 1));
  }
  return m;
}

}  // namespace mtforge::filter
