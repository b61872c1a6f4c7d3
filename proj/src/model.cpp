#include "mtforge/model.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "mtforge/error.hpp"

namespace mtforge::model {

using json = nlohmann::json;

namespace {
constexpr double kLnEps = 1e-5;
}

Arch arch_from_string(const std::string& s) {
  if (s == "BIG") return Arch::Big;
  if (s == "DEEP") return Arch::Deep;
  if (s == "AAN") return Arch::Aan;
  if (s == "SELF_FIRST") return Arch::SelfFirst;
  if (s == "AAN_FIRST") return Arch::AanFirst;
  raise(Errc::parse, "unknown arch: " + s);
}

const char* to_string(Arch a) {
  switch (a) {
    case Arch::Big: return "BIG";
    case Arch::Deep: return "DEEP";
    case Arch::Aan: return "AAN";
    case Arch::SelfFirst: return "SELF_FIRST";
    case Arch::AanFirst: return "AAN_FIRST";
  }
  return "BIG";
}

const char* to_string(LayerKind k) { return k == LayerKind::Self ? "SELF" : "AAN"; }

std::vector<LayerKind> layer_plan(Arch arch, int dec_layers) {
  if (dec_layers < 1) raise(Errc::invalid_arg, "dec_layers must be >= 1");
  std::vector<LayerKind> plan(dec_layers);
  for (int i = 0; i < dec_layers; ++i) {
    switch (arch) {
      case Arch::Big:
      case Arch::Deep: plan[i] = LayerKind::Self; break;
      case Arch::Aan: plan[i] = LayerKind::Aan; break;
      case Arch::SelfFirst: plan[i] = (i % 2 == 0) ? LayerKind::Self : LayerKind::Aan; break;
      case Arch::AanFirst: plan[i] = (i % 2 == 0) ? LayerKind::Aan : LayerKind::Self; break;
    }
  }
  return plan;
}

void ModelConfig::validate() const {
  if (hidden <= 0 || ffn <= 0 || heads <= 0) raise(Errc::invalid_arg, "bad dims");
  if (hidden % heads != 0) raise(Errc::invalid_arg, "hidden must be divisible by heads");
  if (static_cast<int>(dec_plan.size()) != dec_layers)
    raise(Errc::invalid_arg, "dec_plan length must equal dec_layers");
  if (enc_layers < 1 || dec_layers < 1) raise(Errc::invalid_arg, "need >= 1 layer per side");
  if (src_vocab < 4 || tgt_vocab < 4) raise(Errc::invalid_arg, "vocab too small");
  if (max_len < 2) raise(Errc::invalid_arg, "max_len too small");
}

std::string ModelConfig::to_json() const {
  json j;
  j["enc_layers"] = enc_layers;
  j["dec_layers"] = dec_layers;
  j["hidden"] = hidden;
  j["ffn"] = ffn;
  j["heads"] = heads;
  std::vector<std::string> plan;
  for (auto k : dec_plan) plan.push_back(to_string(k));
  j["dec_plan"] = plan;
  j["src_vocab"] = src_vocab;
  j["tgt_vocab"] = tgt_vocab;
  j["max_len"] = max_len;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  ModelConfig c;
  c.enc_layers = j.value("enc_layers", c.enc_layers);
  c.dec_layers = j.value("dec_layers", c.dec_layers);
  c.hidden = j.value("hidden", c.hidden);
  c.ffn = j.value("ffn", c.ffn);
  c.heads = j.value("heads", c.heads);
  c.src_vocab = j.value("src_vocab", c.src_vocab);
  c.tgt_vocab = j.value("tgt_vocab", c.tgt_vocab);
  c.max_len = j.value("max_len", c.max_len);
  if (j.contains("dec_plan")) {
    for (const auto& s : j["dec_plan"])
      c.dec_plan.push_back(s.get<std::string>() == "AAN" ? LayerKind::Aan : LayerKind::Self);
  } else if (j.contains("arch")) {
    c.dec_plan = layer_plan(arch_from_string(j["arch"].get<std::string>()), c.dec_layers);
  } else {
    c.dec_plan.assign(c.dec_layers, LayerKind::Self);
  }
  return c;
}

std::string TrainHyper::to_json() const {
  json j;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["batch_tokens"] = batch_tokens;
  j["update_freq"] = update_freq;
  j["warmup_steps"] = warmup_steps;
  j["lr_peak"] = lr_peak;
  j["label_smoothing"] = label_smoothing;
  return j.dump();
}

TrainHyper TrainHyper::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  TrainHyper h;
  h.beta1 = j.value("beta1", h.beta1);
  h.beta2 = j.value("beta2", h.beta2);
  h.adam_eps = j.value("adam_eps", h.adam_eps);
  h.batch_tokens = j.value("batch_tokens", h.batch_tokens);
  h.update_freq = j.value("update_freq", h.update_freq);
  h.warmup_steps = j.value("warmup_steps", h.warmup_steps);
  h.lr_peak = j.value("lr_peak", h.lr_peak);
  h.label_smoothing = j.value("label_smoothing", h.label_smoothing);
  return h;
}

double lr_at(const TrainHyper& h, long step) {
  double s = static_cast<double>(std::max(step, 1L));
  double w = static_cast<double>(std::max(h.warmup_steps, 1));
  return h.lr_peak * std::min(s / w, std::sqrt(w / s));
}

// ------------------------------------------------------------ parameters

namespace {

// rng == nullptr allocates zeros (checkpoint loading, gradient buffers).
void init_linear(Mat& m, Rng* rng) {
  if (!rng) {
    m.setZero();
    return;
  }
  double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng->uniform(-limit, limit);
}

void init_embedding(Mat& m, Rng* rng) {
  if (!rng) {
    m.setZero();
    return;
  }
  double std = 1.0 / std::sqrt(static_cast<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng->normal(0.0, std);
}

void init_ln(LnParams& ln, int h, Rng* rng) {
  ln.gamma = rng ? Vec::Ones(h) : Vec::Zero(h);
  ln.beta = Vec::Zero(h);
}

void init_attn(AttnParams& a, int h, Rng* rng) {
  a.wq.resize(h, h);
  a.wk.resize(h, h);
  a.wv.resize(h, h);
  a.wo.resize(h, h);
  init_linear(a.wq, rng);
  init_linear(a.wk, rng);
  init_linear(a.wv, rng);
  init_linear(a.wo, rng);
  a.bq = Vec::Zero(h);
  a.bk = Vec::Zero(h);
  a.bv = Vec::Zero(h);
  a.bo = Vec::Zero(h);
}

void init_ffn(FfnParams& f, int h_in, int h_mid, int h_out, Rng* rng) {
  f.w1.resize(h_in, h_mid);
  f.w2.resize(h_mid, h_out);
  init_linear(f.w1, rng);
  init_linear(f.w2, rng);
  f.b1 = Vec::Zero(h_mid);
  f.b2 = Vec::Zero(h_out);
}

Params build_params(const ModelConfig& cfg, Rng* rng) {
  cfg.validate();
  Params p;
  p.cfg = cfg;
  const int h = cfg.hidden;

  p.src_emb.resize(cfg.src_vocab, h);
  p.tgt_emb.resize(cfg.tgt_vocab, h);
  init_embedding(p.src_emb, rng);
  init_embedding(p.tgt_emb, rng);

  p.enc.resize(cfg.enc_layers);
  for (auto& l : p.enc) {
    init_ln(l.ln1, h, rng);
    init_attn(l.attn, h, rng);
    init_ln(l.ln2, h, rng);
    init_ffn(l.ffn, h, cfg.ffn, h, rng);
  }

  p.dec.resize(cfg.dec_layers);
  for (int i = 0; i < cfg.dec_layers; ++i) {
    auto& l = p.dec[i];
    l.kind = cfg.dec_plan[i];
    if (l.kind == LayerKind::Self) {
      init_ln(l.ln1, h, rng);
      init_attn(l.self_attn, h, rng);
    } else {
      init_ffn(l.aan.ffn, h, cfg.ffn, h, rng);
      l.aan.wg.resize(2 * h, 2 * h);
      init_linear(l.aan.wg, rng);
      l.aan.bg = Vec::Zero(2 * h);
      init_ln(l.aan.ln_out, h, rng);
    }
    init_ln(l.ln2, h, rng);
    init_attn(l.cross, h, rng);
    init_ln(l.ln3, h, rng);
    init_ffn(l.ffn, h, cfg.ffn, h, rng);
  }

  init_ln(p.enc_ln, h, rng);
  init_ln(p.dec_ln, h, rng);
  p.w_out.resize(h, cfg.tgt_vocab);
  init_linear(p.w_out, rng);
  p.b_out = Vec::Zero(cfg.tgt_vocab);
  return p;
}

}  // namespace

Params Params::init(const ModelConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  return build_params(cfg, &rng);
}

Params Params::alloc(const ModelConfig& cfg) { return build_params(cfg, nullptr); }

Params Params::zeros_like(const Params& src) {
  Params p = src;
  p.set_zero();
  return p;
}

void Params::set_zero() {
  for (auto& t : tensors())
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = 0.0;
}

bool Params::all_finite() {
  for (auto& t : tensors())
    for (Eigen::Index i = 0; i < t.size(); ++i)
      if (!std::isfinite(t.data[i])) return false;
  return true;
}

long Params::scalar_count() {
  long n = 0;
  for (auto& t : tensors()) n += t.size();
  return n;
}

namespace {

void add_ln(std::vector<TensorRef>& out, const std::string& prefix, LnParams& ln) {
  out.push_back({prefix + ".gamma", ln.gamma.data(), ln.gamma.size(), 1});
  out.push_back({prefix + ".beta", ln.beta.data(), ln.beta.size(), 1});
}

void add_attn(std::vector<TensorRef>& out, const std::string& prefix, AttnParams& a) {
  out.push_back({prefix + ".wq", a.wq.data(), a.wq.rows(), a.wq.cols()});
  out.push_back({prefix + ".wk", a.wk.data(), a.wk.rows(), a.wk.cols()});
  out.push_back({prefix + ".wv", a.wv.data(), a.wv.rows(), a.wv.cols()});
  out.push_back({prefix + ".wo", a.wo.data(), a.wo.rows(), a.wo.cols()});
  out.push_back({prefix + ".bq", a.bq.data(), a.bq.size(), 1});
  out.push_back({prefix + ".bk", a.bk.data(), a.bk.size(), 1});
  out.push_back({prefix + ".bv", a.bv.data(), a.bv.size(), 1});
  out.push_back({prefix + ".bo", a.bo.data(), a.bo.size(), 1});
}

void add_ffn(std::vector<TensorRef>& out, const std::string& prefix, FfnParams& f) {
  out.push_back({prefix + ".w1", f.w1.data(), f.w1.rows(), f.w1.cols()});
  out.push_back({prefix + ".b1", f.b1.data(), f.b1.size(), 1});
  out.push_back({prefix + ".w2", f.w2.data(), f.w2.rows(), f.w2.cols()});
  out.push_back({prefix + ".b2", f.b2.data(), f.b2.size(), 1});
}

}  // namespace

std::vector<TensorRef> Params::tensors() {
  std::vector<TensorRef> out;
  out.push_back({"src_emb", src_emb.data(), src_emb.rows(), src_emb.cols()});
  out.push_back({"tgt_emb", tgt_emb.data(), tgt_emb.rows(), tgt_emb.cols()});
  for (size_t i = 0; i < enc.size(); ++i) {
    std::string pre = "enc." + std::to_string(i);
    add_ln(out, pre + ".ln1", enc[i].ln1);
    add_attn(out, pre + ".attn", enc[i].attn);
    add_ln(out, pre + ".ln2", enc[i].ln2);
    add_ffn(out, pre + ".ffn", enc[i].ffn);
  }
  for (size_t i = 0; i < dec.size(); ++i) {
    std::string pre = "dec." + std::to_string(i);
    auto& l = dec[i];
    if (l.kind == LayerKind::Self) {
      add_ln(out, pre + ".ln1", l.ln1);
      add_attn(out, pre + ".self_attn", l.self_attn);
    } else {
      add_ffn(out, pre + ".aan.ffn", l.aan.ffn);
      out.push_back({pre + ".aan.wg", l.aan.wg.data(), l.aan.wg.rows(), l.aan.wg.cols()});
      out.push_back({pre + ".aan.bg", l.aan.bg.data(), l.aan.bg.size(), 1});
      add_ln(out, pre + ".aan.ln_out", l.aan.ln_out);
    }
    add_ln(out, pre + ".ln2", l.ln2);
    add_attn(out, pre + ".cross", l.cross);
    add_ln(out, pre + ".ln3", l.ln3);
    add_ffn(out, pre + ".ffn", l.ffn);
  }
  add_ln(out, "enc_ln", enc_ln);
  add_ln(out, "dec_ln", dec_ln);
  out.push_back({"w_out", w_out.data(), w_out.rows(), w_out.cols()});
  out.push_back({"b_out", b_out.data(), b_out.size(), 1});
  return out;
}

// ----------------------------------------------------------- forward

Mat positional_encoding(int n, int hidden, int offset) {
  Mat pe(n, hidden);
  for (int pos = 0; pos < n; ++pos) {
    for (int i = 0; i < hidden; i += 2) {
      double angle = (pos + offset) / std::pow(10000.0, static_cast<double>(i) / hidden);
      pe(pos, i) = std::sin(angle);
      if (i + 1 < hidden) pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

namespace {

Mat layer_norm(const Mat& x, const LnParams& ln, LnTrace& tr) {
  const Eigen::Index n = x.rows(), h = x.cols();
  tr.xhat.resize(n, h);
  tr.inv_std.resize(n);
  Mat y(n, h);
  for (Eigen::Index r = 0; r < n; ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + kLnEps);
    tr.inv_std(r) = inv;
    tr.xhat.row(r) = (x.row(r).array() - mu) * inv;
    y.row(r) = tr.xhat.row(r).cwiseProduct(ln.gamma.transpose()) + ln.beta.transpose();
  }
  return y;
}

// dx is accumulated; param grads go to g.
void layer_norm_backward(const Mat& dy, const LnParams& ln, const LnTrace& tr, Mat& dx,
                         LnParams& g) {
  const Eigen::Index n = dy.rows(), h = dy.cols();
  for (Eigen::Index r = 0; r < n; ++r) {
    g.gamma += dy.row(r).cwiseProduct(tr.xhat.row(r)).transpose();
    g.beta += dy.row(r).transpose();
    Eigen::RowVectorXd gy = dy.row(r).cwiseProduct(ln.gamma.transpose());
    double m1 = gy.mean();
    double m2 = gy.cwiseProduct(tr.xhat.row(r)).mean();
    dx.row(r) += tr.inv_std(r) *
                 (gy.array() - m1 - tr.xhat.row(r).array() * m2).matrix();
  }
  (void)h;
}

Mat softmax_rows(const Mat& s) {
  Mat out(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    double mx = s.row(r).maxCoeff();
    Eigen::ArrayXd e = (s.row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

Mat attention(const AttnParams& p, int heads, const Mat& x_q, const Mat& x_kv, bool causal,
              AttnTrace& tr) {
  const Eigen::Index n = x_q.rows(), m = x_kv.rows(), h = x_q.cols();
  const Eigen::Index dk = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  tr.x_q = x_q;
  tr.x_kv = x_kv;
  tr.q = x_q * p.wq;
  tr.q.rowwise() += p.bq.transpose();
  tr.k = x_kv * p.wk;
  tr.k.rowwise() += p.bk.transpose();
  tr.v = x_kv * p.wv;
  tr.v.rowwise() += p.bv.transpose();

  tr.att.assign(heads, Mat());
  tr.heads_out.resize(n, h);
  for (int hd = 0; hd < heads; ++hd) {
    auto qi = tr.q.middleCols(hd * dk, dk);
    auto ki = tr.k.middleCols(hd * dk, dk);
    auto vi = tr.v.middleCols(hd * dk, dk);
    Mat scores = scale * (qi * ki.transpose());
    if (causal) {
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = r + 1; c < m; ++c)
          scores(r, c) = -std::numeric_limits<double>::infinity();
    }
    tr.att[hd] = softmax_rows(scores);
    tr.heads_out.middleCols(hd * dk, dk) = tr.att[hd] * vi;
  }
  Mat out = tr.heads_out * p.wo;
  out.rowwise() += p.bo.transpose();
  return out;
}

void attention_backward(const Mat& dout, const AttnParams& p, int heads, const AttnTrace& tr,
                        Mat& dx_q, Mat& dx_kv, AttnParams& g) {
  const Eigen::Index n = tr.x_q.rows(), m = tr.x_kv.rows(), h = tr.x_q.cols();
  const Eigen::Index dk = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  g.wo += tr.heads_out.transpose() * dout;
  g.bo += dout.colwise().sum().transpose();
  Mat dheads = dout * p.wo.transpose();

  Mat dq = Mat::Zero(n, h), dkm = Mat::Zero(m, h), dv = Mat::Zero(m, h);
  for (int hd = 0; hd < heads; ++hd) {
    auto qi = tr.q.middleCols(hd * dk, dk);
    auto ki = tr.k.middleCols(hd * dk, dk);
    auto vi = tr.v.middleCols(hd * dk, dk);
    const Mat& a = tr.att[hd];
    Mat doi = dheads.middleCols(hd * dk, dk);
    Mat da = doi * vi.transpose();                    // n x m
    dv.middleCols(hd * dk, dk) += a.transpose() * doi;
    // softmax rows backward
    Mat ds(n, m);
    for (Eigen::Index r = 0; r < n; ++r) {
      double dot = a.row(r).cwiseProduct(da.row(r)).sum();
      ds.row(r) = (a.row(r).array() * (da.row(r).array() - dot)).matrix();
    }
    dq.middleCols(hd * dk, dk) += scale * (ds * ki);
    dkm.middleCols(hd * dk, dk) += scale * (ds.transpose() * qi);
  }

  g.wq += tr.x_q.transpose() * dq;
  g.bq += dq.colwise().sum().transpose();
  g.wk += tr.x_kv.transpose() * dkm;
  g.bk += dkm.colwise().sum().transpose();
  g.wv += tr.x_kv.transpose() * dv;
  g.bv += dv.colwise().sum().transpose();
  dx_q += dq * p.wq.transpose();
  dx_kv += dkm * p.wk.transpose() + dv * p.wv.transpose();
}

Mat ffn_forward(const FfnParams& p, const Mat& x, FfnTrace& tr) {
  tr.x = x;
  tr.a1 = x * p.w1;
  tr.a1.rowwise() += p.b1.transpose();
  Mat r = tr.a1.cwiseMax(0.0);
  Mat out = r * p.w2;
  out.rowwise() += p.b2.transpose();
  return out;
}

Mat ffn_backward(const Mat& dout, const FfnParams& p, const FfnTrace& tr, FfnParams& g) {
  Mat r = tr.a1.cwiseMax(0.0);
  g.w2 += r.transpose() * dout;
  g.b2 += dout.colwise().sum().transpose();
  Mat dr = dout * p.w2.transpose();
  Mat da1 = ((tr.a1.array() > 0.0).cast<double>() * dr.array()).matrix();
  g.w1 += tr.x.transpose() * da1;
  g.b1 += da1.colwise().sum().transpose();
  return da1 * p.w1.transpose();
}

void cumulative_average_backward(const Mat& davg, Mat& dy) {
  Eigen::RowVectorXd suffix = Eigen::RowVectorXd::Zero(davg.cols());
  for (Eigen::Index r = davg.rows() - 1; r >= 0; --r) {
    suffix += davg.row(r) / static_cast<double>(r + 1);
    dy.row(r) += suffix;
  }
}

void aan_backward(const Mat& dout, const AanParams& p, const AanTrace& tr, Mat& dy, AanParams& g) {
  const Eigen::Index n = tr.y.rows(), h = tr.y.cols();
  Mat du = Mat::Zero(n, h);
  layer_norm_backward(dout, p.ln_out, tr.ln_out, du, g.ln_out);

  dy += du.cwiseProduct(Mat::Ones(n, h) + tr.i_gate);
  Mat di = du.cwiseProduct(tr.y);
  Mat df = du.cwiseProduct(tr.gtilde);
  Mat dgtilde = du.cwiseProduct(tr.f_gate);

  Mat dz(n, 2 * h);
  dz.leftCols(h) = (di.array() * tr.i_gate.array() * (1.0 - tr.i_gate.array())).matrix();
  dz.rightCols(h) = (df.array() * tr.f_gate.array() * (1.0 - tr.f_gate.array())).matrix();

  Mat cat(n, 2 * h);
  cat.leftCols(h) = tr.y;
  cat.rightCols(h) = tr.gtilde;
  g.wg += cat.transpose() * dz;
  g.bg += dz.colwise().sum().transpose();
  Mat dcat = dz * p.wg.transpose();
  dy += dcat.leftCols(h);
  dgtilde += dcat.rightCols(h);

  Mat davg = ffn_backward(dgtilde, p.ffn, tr.ffn, g.ffn);
  cumulative_average_backward(davg, dy);
}

Mat embed(const Mat& emb, const std::vector<int>& ids, int max_id) {
  const int h = static_cast<int>(emb.cols());
  Mat x(static_cast<Eigen::Index>(ids.size()), h);
  const double s = std::sqrt(static_cast<double>(h));
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= max_id)
      raise(Errc::vocab_out_of_range, "token id " + std::to_string(ids[i]));
    x.row(static_cast<Eigen::Index>(i)) = emb.row(ids[i]) * s;
  }
  x += positional_encoding(static_cast<int>(ids.size()), h);
  return x;
}

Mat log_softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

}  // namespace

Mat cumulative_average(const Mat& y) {
  Mat avg(y.rows(), y.cols());
  Eigen::RowVectorXd run = Eigen::RowVectorXd::Zero(y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    run += y.row(r);
    avg.row(r) = run / static_cast<double>(r + 1);
  }
  return avg;
}

Mat avg_attention(const AanParams& p, const Mat& y, AanTrace& tr) {
  const Eigen::Index n = y.rows(), h = y.cols();
  tr.y = y;
  tr.avg = cumulative_average(y);
  tr.gtilde = ffn_forward(p.ffn, tr.avg, tr.ffn);

  Mat cat(n, 2 * h);
  cat.leftCols(h) = y;
  cat.rightCols(h) = tr.gtilde;
  Mat z = cat * p.wg;
  z.rowwise() += p.bg.transpose();
  tr.i_gate = (1.0 / (1.0 + (-z.leftCols(h).array()).exp())).matrix();
  tr.f_gate = (1.0 / (1.0 + (-z.rightCols(h).array()).exp())).matrix();

  tr.u = y + tr.i_gate.cwiseProduct(y) + tr.f_gate.cwiseProduct(tr.gtilde);
  return layer_norm(tr.u, p.ln_out, tr.ln_out);
}

Mat encode_source(const Params& p, const std::vector<int>& src_ids, Trace& tr) {
  tr.src_ids = src_ids;
  tr.enc_x0 = embed(p.src_emb, src_ids, p.cfg.src_vocab);
  tr.enc_layers.assign(p.enc.size(), {});
  Mat x = tr.enc_x0;
  for (size_t l = 0; l < p.enc.size(); ++l) {
    auto& lt = tr.enc_layers[l];
    const auto& lp = p.enc[l];
    Mat h1 = layer_norm(x, lp.ln1, lt.ln1);
    lt.x1 = x + attention(lp.attn, p.cfg.heads, h1, h1, /*causal=*/false, lt.attn);
    Mat h2 = layer_norm(lt.x1, lp.ln2, lt.ln2);
    x = lt.x1 + ffn_forward(lp.ffn, h2, lt.ffn);
  }
  tr.enc_out = layer_norm(x, p.enc_ln, tr.enc_ln);
  return tr.enc_out;
}

Mat forward(const Params& p, const std::vector<int>& src_ids, const std::vector<int>& din_ids,
            Trace& tr) {
  if (src_ids.empty() || din_ids.empty()) raise(Errc::invalid_arg, "empty sequence");
  encode_source(p, src_ids, tr);

  tr.din_ids = din_ids;
  tr.dec_x0 = embed(p.tgt_emb, din_ids, p.cfg.tgt_vocab);
  tr.dec_layers.assign(p.dec.size(), {});
  Mat y = tr.dec_x0;
  for (size_t l = 0; l < p.dec.size(); ++l) {
    auto& lt = tr.dec_layers[l];
    const auto& lp = p.dec[l];
    if (lp.kind == LayerKind::Self) {
      Mat h1 = layer_norm(y, lp.ln1, lt.ln1);
      lt.y1 = y + attention(lp.self_attn, p.cfg.heads, h1, h1, /*causal=*/true, lt.self_attn);
    } else {
      lt.y1 = avg_attention(lp.aan, y, lt.aan);
    }
    Mat h2 = layer_norm(lt.y1, lp.ln2, lt.ln2);
    lt.y2 = lt.y1 + attention(lp.cross, p.cfg.heads, h2, tr.enc_out, /*causal=*/false, lt.cross);
    Mat h3 = layer_norm(lt.y2, lp.ln3, lt.ln3);
    y = lt.y2 + ffn_forward(lp.ffn, h3, lt.ffn);
  }
  tr.dec_out = layer_norm(y, p.dec_ln, tr.dec_ln);
  tr.logits = tr.dec_out * p.w_out;
  tr.logits.rowwise() += p.b_out.transpose();
  return log_softmax_rows(tr.logits);
}

double loss_and_grad(const Mat& logprobs, const std::vector<int>& targets, double label_smoothing,
                     Mat& dlogits) {
  const Eigen::Index n = logprobs.rows(), v = logprobs.cols();
  if (static_cast<Eigen::Index>(targets.size()) != n)
    raise(Errc::invalid_arg, "targets length mismatch");
  const double eps = label_smoothing;
  const double off = eps / static_cast<double>(v);

  dlogits.resize(n, v);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    int gold = targets[r];
    if (gold < 0 || gold >= v) raise(Errc::vocab_out_of_range, "target id");
    loss -= (1.0 - eps) * logprobs(r, gold) + off * logprobs.row(r).sum();
    dlogits.row(r) = logprobs.row(r).array().exp() - off;
    dlogits(r, gold) -= (1.0 - eps);
  }
  return loss;
}

void backward(const Params& p, const Trace& tr, const Mat& dlogits, double scale, Params& grads) {
  const Eigen::Index h = p.cfg.hidden;
  const Eigen::Index nt = tr.dec_out.rows();
  Mat dl = dlogits * scale;

  grads.w_out += tr.dec_out.transpose() * dl;
  grads.b_out += dl.colwise().sum().transpose();
  Mat ddec_out = dl * p.w_out.transpose();

  Mat dy = Mat::Zero(nt, h);
  layer_norm_backward(ddec_out, p.dec_ln, tr.dec_ln, dy, grads.dec_ln);

  Mat denc_out = Mat::Zero(tr.enc_out.rows(), h);
  for (int l = static_cast<int>(p.dec.size()) - 1; l >= 0; --l) {
    const auto& lp = p.dec[l];
    auto& gl = grads.dec[l];
    const auto& lt = tr.dec_layers[l];

    // y3 = y2 + FFN(LN3(y2))
    Mat dffn_in = ffn_backward(dy, lp.ffn, lt.ffn, gl.ffn);
    Mat dy2 = dy;
    layer_norm_backward(dffn_in, lp.ln3, lt.ln3, dy2, gl.ln3);

    // y2 = y1 + Cross(LN2(y1), enc_out)
    Mat dcross_q = Mat::Zero(nt, h);
    attention_backward(dy2, lp.cross, p.cfg.heads, lt.cross, dcross_q, denc_out, gl.cross);
    Mat dy1 = dy2;
    layer_norm_backward(dcross_q, lp.ln2, lt.ln2, dy1, gl.ln2);

    if (lp.kind == LayerKind::Self) {
      // y1 = y + SelfAttn(LN1(y))
      Mat dself_in = Mat::Zero(nt, h);
      attention_backward(dy1, lp.self_attn, p.cfg.heads, lt.self_attn, dself_in, dself_in,
                         gl.self_attn);
      dy = dy1;
      layer_norm_backward(dself_in, lp.ln1, lt.ln1, dy, gl.ln1);
    } else {
      dy = Mat::Zero(nt, h);
      aan_backward(dy1, lp.aan, lt.aan, dy, gl.aan);
    }
  }
  // decoder embedding
  {
    const double s = std::sqrt(static_cast<double>(h));
    for (size_t i = 0; i < tr.din_ids.size(); ++i)
      grads.tgt_emb.row(tr.din_ids[i]) += dy.row(static_cast<Eigen::Index>(i)) * s;
  }

  // encoder stack
  Mat dx = Mat::Zero(tr.enc_out.rows(), h);
  layer_norm_backward(denc_out, p.enc_ln, tr.enc_ln, dx, grads.enc_ln);
  for (int l = static_cast<int>(p.enc.size()) - 1; l >= 0; --l) {
    const auto& lp = p.enc[l];
    auto& gl = grads.enc[l];
    const auto& lt = tr.enc_layers[l];

    Mat dffn_in = ffn_backward(dx, lp.ffn, lt.ffn, gl.ffn);
    Mat dx1 = dx;
    layer_norm_backward(dffn_in, lp.ln2, lt.ln2, dx1, gl.ln2);

    Mat dattn_in = Mat::Zero(dx.rows(), h);
    attention_backward(dx1, lp.attn, p.cfg.heads, lt.attn, dattn_in, dattn_in, gl.attn);
    dx = dx1;
    layer_norm_backward(dattn_in, lp.ln1, lt.ln1, dx, gl.ln1);
  }
  {
    const double s = std::sqrt(static_cast<double>(h));
    for (size_t i = 0; i < tr.src_ids.size(); ++i)
      grads.src_emb.row(tr.src_ids[i]) += dx.row(static_cast<Eigen::Index>(i)) * s;
  }
}

}  // namespace mtforge::model
