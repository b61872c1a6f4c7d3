#include "mtforge/decode.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "mtforge/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace mtforge::model {

using json = nlohmann::json;

namespace {

Eigen::RowVectorXd ln_row(const Eigen::RowVectorXd& x, const LnParams& ln) {
  double mu = x.mean();
  double var = (x.array() - mu).square().mean();
  double inv = 1.0 / std::sqrt(var + 1e-5);
  return (((x.array() - mu) * inv) * ln.gamma.transpose().array() +
          ln.beta.transpose().array())
      .matrix();
}

Eigen::RowVectorXd ffn_row(const FfnParams& p, const Eigen::RowVectorXd& x) {
  Eigen::RowVectorXd a1 = x * p.w1 + p.b1.transpose();
  return a1.cwiseMax(0.0) * p.w2 + p.b2.transpose();
}

Eigen::RowVectorXd attend_row(const AttnParams& p, int heads, const Eigen::RowVectorXd& q_in,
                              const Mat& k, const Mat& v) {
  const Eigen::Index h = q_in.cols();
  const Eigen::Index dk = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Eigen::RowVectorXd q = q_in * p.wq + p.bq.transpose();
  Eigen::RowVectorXd heads_out(h);
  for (int hd = 0; hd < heads; ++hd) {
    auto qi = q.middleCols(hd * dk, dk);
    auto ki = k.middleCols(hd * dk, dk);
    auto vi = v.middleCols(hd * dk, dk);
    Eigen::RowVectorXd scores = scale * (qi * ki.transpose());
    double mx = scores.maxCoeff();
    Eigen::ArrayXd e = (scores.transpose().array() - mx).exp();
    Eigen::RowVectorXd att = (e / e.sum()).matrix().transpose();
    heads_out.middleCols(hd * dk, dk) = att * vi;
  }
  return heads_out * p.wo + p.bo.transpose();
}

Eigen::RowVectorXd log_softmax_row(const Eigen::RowVectorXd& logits) {
  double mx = logits.maxCoeff();
  double lse = mx + std::log((logits.array() - mx).exp().sum());
  return (logits.array() - lse).matrix();
}

}  // namespace

size_t DecodeState::layer_state_scalars() const {
  size_t n = 0;
  for (const auto& l : layers) {
    n += static_cast<size_t>(l.k_cache.size() + l.v_cache.size() + l.aan_sum.size());
    if (l.aan_count || l.aan_sum.size()) n += 1;  // the counter itself
  }
  return n;
}

std::shared_ptr<const EncCache> build_enc_cache(const Params& p, const std::vector<int>& src_ids) {
  auto cache = std::make_shared<EncCache>();
  Trace tr;
  cache->enc_out = encode_source(p, src_ids, tr);
  cache->cross_k.reserve(p.dec.size());
  cache->cross_v.reserve(p.dec.size());
  for (const auto& l : p.dec) {
    Mat k = cache->enc_out * l.cross.wk;
    k.rowwise() += l.cross.bk.transpose();
    Mat v = cache->enc_out * l.cross.wv;
    v.rowwise() += l.cross.bv.transpose();
    cache->cross_k.push_back(std::move(k));
    cache->cross_v.push_back(std::move(v));
  }
  return cache;
}

DecodeState init_decode(const Params& p, std::shared_ptr<const EncCache> enc) {
  DecodeState st;
  st.enc = std::move(enc);
  st.layers.resize(p.dec.size());
  const int h = p.cfg.hidden;
  for (size_t l = 0; l < p.dec.size(); ++l) {
    if (p.dec[l].kind == LayerKind::Aan) st.layers[l].aan_sum = Vec::Zero(h);
  }
  return st;
}

Vec decode_step(const Params& p, DecodeState& state, int token_id) {
  if (state.layers.size() != p.dec.size() || !state.enc ||
      state.enc->cross_k.size() != p.dec.size())
    raise(Errc::state_mismatch, "decode state does not match model");
  const int h = p.cfg.hidden;
  if (token_id < 0 || token_id >= p.cfg.tgt_vocab)
    raise(Errc::vocab_out_of_range, "token id " + std::to_string(token_id));

  Eigen::RowVectorXd x =
      p.tgt_emb.row(token_id) * std::sqrt(static_cast<double>(h)) +
      positional_encoding(1, h, state.pos).row(0);

  for (size_t l = 0; l < p.dec.size(); ++l) {
    const auto& lp = p.dec[l];
    auto& ls = state.layers[l];
    if (lp.kind == LayerKind::Self) {
      Eigen::RowVectorXd yhat = ln_row(x, lp.ln1);
      Eigen::RowVectorXd k_new = yhat * lp.self_attn.wk + lp.self_attn.bk.transpose();
      Eigen::RowVectorXd v_new = yhat * lp.self_attn.wv + lp.self_attn.bv.transpose();
      ls.k_cache.conservativeResize(ls.k_cache.rows() + 1, h);
      ls.k_cache.row(ls.k_cache.rows() - 1) = k_new;
      ls.v_cache.conservativeResize(ls.v_cache.rows() + 1, h);
      ls.v_cache.row(ls.v_cache.rows() - 1) = v_new;
      x += attend_row(lp.self_attn, p.cfg.heads, yhat, ls.k_cache, ls.v_cache);
    } else {
      // constant-size state: running sum plus count
      ls.aan_sum += x.transpose();
      ls.aan_count += 1;
      Eigen::RowVectorXd avg = ls.aan_sum.transpose() / static_cast<double>(ls.aan_count);
      Eigen::RowVectorXd gtilde = ffn_row(lp.aan.ffn, avg);
      Eigen::RowVectorXd cat(2 * h);
      cat.leftCols(h) = x;
      cat.rightCols(h) = gtilde;
      Eigen::RowVectorXd z = cat * lp.aan.wg + lp.aan.bg.transpose();
      Eigen::ArrayXd zi = z.leftCols(h).transpose().array();
      Eigen::ArrayXd zf = z.rightCols(h).transpose().array();
      Eigen::RowVectorXd ig = (1.0 / (1.0 + (-zi).exp())).matrix().transpose();
      Eigen::RowVectorXd fg = (1.0 / (1.0 + (-zf).exp())).matrix().transpose();
      Eigen::RowVectorXd u =
          x + ig.cwiseProduct(x) + fg.cwiseProduct(gtilde);
      x = ln_row(u, lp.aan.ln_out);
    }
    Eigen::RowVectorXd h2 = ln_row(x, lp.ln2);
    x += attend_row(lp.cross, p.cfg.heads, h2, state.enc->cross_k[l], state.enc->cross_v[l]);
    Eigen::RowVectorXd h3 = ln_row(x, lp.ln3);
    x += ffn_row(lp.ffn, h3);
  }

  Eigen::RowVectorXd out = ln_row(x, p.dec_ln);
  Eigen::RowVectorXd logits = out * p.w_out + p.b_out.transpose();
  state.pos += 1;
  return log_softmax_row(logits).transpose();
}

// ------------------------------------------------------------- beam

namespace {

// Mean of member distributions in probability space. A single member's
// log-probabilities pass through untouched.
Vec combine_rows(const std::vector<Vec>& rows) {
  if (rows.size() == 1) return rows[0];
  Eigen::ArrayXd mean = Eigen::ArrayXd::Zero(rows[0].size());
  for (const auto& r : rows) mean += r.array().exp();
  mean /= static_cast<double>(rows.size());
  return mean.log().matrix();
}

struct BeamHyp {
  std::vector<int> tokens;
  double score = 0.0;
  std::vector<DecodeState> states;
  Vec next_logprobs;
};

}  // namespace

Hypothesis beam_decode(const std::vector<const Params*>& members, const std::vector<int>& src_ids,
                       const DecodeOptions& opt) {
  if (members.empty()) raise(Errc::invalid_arg, "empty ensemble");
  if (opt.beam < 1) raise(Errc::invalid_arg, "beam must be >= 1");
  const int vocab = members[0]->cfg.tgt_vocab;
  for (const auto* m : members)
    if (m->cfg.tgt_vocab != vocab) raise(Errc::vocab_mismatch, "ensemble vocab sizes differ");

  auto step_all = [&](BeamHyp& hyp, int token) {
    std::vector<Vec> rows(members.size());
    for (size_t k = 0; k < members.size(); ++k)
      rows[k] = decode_step(*members[k], hyp.states[k], token);
    hyp.next_logprobs = combine_rows(rows);
  };

  BeamHyp root;
  for (const auto* m : members)
    root.states.push_back(init_decode(*m, build_enc_cache(*m, src_ids)));
  step_all(root, Vocab::kBos);

  std::vector<BeamHyp> active{std::move(root)};
  std::vector<Hypothesis> finished;

  struct Cand {
    size_t parent;
    int token;
    double score;
  };

  for (int t = 1; t <= opt.max_len && !active.empty(); ++t) {
    std::vector<Cand> cands;
    cands.reserve(active.size() * static_cast<size_t>(vocab));
    for (size_t a = 0; a < active.size(); ++a)
      for (int v = 0; v < vocab; ++v)
        cands.push_back({a, v, active[a].score + active[a].next_logprobs(v)});
    size_t keep = std::min(static_cast<size_t>(opt.beam), cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(),
                      [](const Cand& a, const Cand& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.token != b.token) return a.token < b.token;
                        return a.parent < b.parent;
                      });

    std::vector<BeamHyp> next;
    for (size_t c = 0; c < keep; ++c) {
      const Cand& cand = cands[c];
      std::vector<int> tokens = active[cand.parent].tokens;
      tokens.push_back(cand.token);
      if (cand.token == Vocab::kEos || t == opt.max_len) {
        double norm = cand.score / std::pow(static_cast<double>(tokens.size()),
                                            opt.length_penalty);
        finished.push_back({std::move(tokens), cand.score, norm});
      } else {
        BeamHyp h;
        h.tokens = std::move(tokens);
        h.score = cand.score;
        h.states = active[cand.parent].states;  // copy-on-branch
        step_all(h, cand.token);
        next.push_back(std::move(h));
      }
    }
    active = std::move(next);
  }

  size_t best = 0;
  for (size_t i = 1; i < finished.size(); ++i)
    if (finished[i].normalized > finished[best].normalized) best = i;
  if (finished.empty()) raise(Errc::internal, "beam search produced no hypothesis");
  return finished[best];
}

Hypothesis beam_decode(const Params& p, const std::vector<int>& src_ids,
                       const DecodeOptions& opt) {
  return beam_decode(std::vector<const Params*>{&p}, src_ids, opt);
}

// ---------------------------------------------------------- sampling

std::vector<int> nucleus_set(const Vec& probs, double p) {
  if (p <= 0.0 || p > 1.0) raise(Errc::invalid_arg, "top-p must be in (0, 1]");
  std::vector<int> order(static_cast<size_t>(probs.size()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs(a) != probs(b)) return probs(a) > probs(b);
    return a < b;
  });
  std::vector<int> set;
  double cum = 0.0;
  for (int id : order) {
    set.push_back(id);
    cum += probs(id);
    if (cum > p) break;
  }
  return set;
}

Hypothesis nucleus_decode(const Params& p, const std::vector<int>& src_ids,
                          const SampleOptions& opt, Rng& rng) {
  DecodeState st = init_decode(p, build_enc_cache(p, src_ids));
  Hypothesis hyp;
  int token = Vocab::kBos;
  for (int t = 0; t < opt.max_len; ++t) {
    Vec logprobs = decode_step(p, st, token);
    Vec probs = logprobs.array().exp().matrix();
    std::vector<int> set = nucleus_set(probs, opt.top_p);
    double mass = 0.0;
    for (int id : set) mass += probs(id);
    double u = rng.uniform01() * mass;
    double cum = 0.0;
    token = set.back();
    for (int id : set) {
      cum += probs(id);
      if (u < cum) {
        token = id;
        break;
      }
    }
    hyp.score += logprobs(token);
    hyp.tokens.push_back(token);
    if (token == Vocab::kEos) break;
  }
  hyp.normalized =
      hyp.score / std::pow(static_cast<double>(std::max<size_t>(hyp.tokens.size(), 1)), 0.6);
  return hyp;
}

// ------------------------------------------------------- model bundle

TokenSentence TranslationModel::translate(const TokenSentence& src,
                                          const DecodeOptions& opt) const {
  std::vector<int> ids = src_vocab.encode(src);
  Hypothesis hyp = beam_decode(params, ids, opt);
  std::vector<int> out;
  for (int id : hyp.tokens)
    if (id != Vocab::kEos) out.push_back(id);
  return tgt_vocab.decode(out, Lang::EN);
}

namespace {
constexpr char kMagic[4] = {'M', 'T', 'F', 'G'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_model(const std::string& path, const TranslationModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io, "cannot write checkpoint: " + path);

  Params& params = const_cast<Params&>(m.params);  // read-only tensor walk
  json header;
  header["version"] = kVersion;
  header["config"] = json::parse(m.cfg.to_json());
  header["src_vocab"] = m.src_vocab.tokens();
  header["tgt_vocab"] = m.tgt_vocab.tokens();
  header["layout"] = "col-major";
  json tensors = json::array();
  for (auto& t : params.tensors())
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  header["tensors"] = tensors;
  std::string header_text = header.dump();

  out.write(kMagic, 4);
  uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  uint64_t len = header_text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header_text.data(), static_cast<std::streamsize>(len));

  std::vector<float> buf;
  for (auto& t : params.tensors()) {
    buf.resize(static_cast<size_t>(t.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i) buf[static_cast<size_t>(i)] =
        static_cast<float>(t.data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) raise(Errc::io, "short write to checkpoint: " + path);
}

TranslationModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io, "cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    raise(Errc::parse, "not a checkpoint file: " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kVersion) raise(Errc::parse, "unsupported checkpoint version");
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string header_text(len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(len));
  if (!in) raise(Errc::parse, "truncated checkpoint header");

  json header = json::parse(header_text);
  TranslationModel m;
  m.cfg = ModelConfig::from_json(header["config"].dump());
  m.src_vocab = Vocab::from_tokens(header["src_vocab"].get<std::vector<std::string>>());
  m.tgt_vocab = Vocab::from_tokens(header["tgt_vocab"].get<std::vector<std::string>>());
  m.params = Params::alloc(m.cfg);

  std::vector<float> buf;
  for (auto& t : m.params.tensors()) {
    buf.resize(static_cast<size_t>(t.size()));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) raise(Errc::parse, "truncated checkpoint data at " + t.name);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = buf[static_cast<size_t>(i)];
  }
  return m;
}

}  // namespace mtforge::model
