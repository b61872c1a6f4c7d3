#include "mtforge/augment.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "mtforge/error.hpp"
#include "mtforge/text_norm.hpp"

namespace mtforge::augment {

using json = nlohmann::json;

std::string origin_tag(Origin o) { return std::string("<") + to_string(o) + ">"; }
std::string domain_tag(Domain d) { return std::string("<") + to_string(d) + ">"; }

const std::set<std::string>& default_protected() {
  static const std::set<std::string> s = {
      "<REAL>", "<BT>", "<FT>", "<NOISE>", "<BIO>", "<NEWS>", "<INHOUSE>",
      text::kTitleMarker, text::kUpperMarker,
  };
  return s;
}

bool is_tag(const std::string& token) {
  static const std::set<std::string> tags = {"<REAL>",    "<BT>",   "<FT>",  "<NOISE>",
                                             "<BIO>",     "<NEWS>", "<INHOUSE>"};
  return tags.count(token) > 0;
}

// ----------------------------------------------------------------- noise

namespace {

std::vector<bool> protected_mask(const TokenSentence& t, const std::set<std::string>& prot) {
  std::vector<bool> mask(t.tokens.size());
  for (size_t i = 0; i < t.tokens.size(); ++i) mask[i] = prot.count(t.tokens[i]) > 0;
  return mask;
}

TokenSentence materialize(const TokenSentence& t, const std::vector<int>& plan) {
  TokenSentence out;
  out.lang = t.lang;
  out.tokens.reserve(plan.size());
  for (int slot : plan)
    out.tokens.push_back(slot == kUnkSlot ? kUnkToken : t.tokens[static_cast<size_t>(slot)]);
  return out;
}

}  // namespace

TokenSentence noise_unk(const TokenSentence& t, double rate, Rng& rng,
                        const std::set<std::string>& prot) {
  return materialize(t, noise_unk_plan(t.tokens.size(), protected_mask(t, prot), rate, rng));
}

TokenSentence noise_delete(const TokenSentence& t, double rate, Rng& rng,
                           const std::set<std::string>& prot) {
  return materialize(t, noise_delete_plan(t.tokens.size(), protected_mask(t, prot), rate, rng));
}

TokenSentence noise_swap(const TokenSentence& t, double rate, int window, Rng& rng,
                         const std::set<std::string>& prot) {
  return materialize(t,
                     noise_swap_plan(t.tokens.size(), protected_mask(t, prot), rate, window, rng));
}

TokenSentence apply_noise(const TokenSentence& t, const NoiseSpec& spec,
                          const std::set<std::string>& prot) {
  Rng rng(spec.seed);
  return materialize(t, noise_plan(t.tokens.size(), protected_mask(t, prot), spec, rng));
}

std::string noise_spec_to_json(const NoiseSpec& spec) {
  json j;
  j["unk_rate"] = spec.unk_rate;
  j["delete_rate"] = spec.delete_rate;
  j["swap_rate"] = spec.swap_rate;
  j["swap_window"] = spec.swap_window;
  j["seed"] = spec.seed;
  return j.dump();
}

NoiseSpec noise_spec_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  NoiseSpec s;
  s.unk_rate = j.value("unk_rate", s.unk_rate);
  s.delete_rate = j.value("delete_rate", s.delete_rate);
  s.swap_rate = j.value("swap_rate", s.swap_rate);
  s.swap_window = j.value("swap_window", s.swap_window);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

// --------------------------------------------------------------- tagging

TokenSentence tag_sentence(const TokenSentence& t, Origin origin, Domain domain) {
  if (!t.tokens.empty() && is_tag(t.tokens[0]))
    raise(Errc::already_tagged, "sentence already starts with " + t.tokens[0]);
  TokenSentence out;
  out.lang = t.lang;
  out.tokens.reserve(t.tokens.size() + 2);
  out.tokens.push_back(origin_tag(origin));
  out.tokens.push_back(domain_tag(domain));
  out.tokens.insert(out.tokens.end(), t.tokens.begin(), t.tokens.end());
  return out;
}

TokenSentence strip_tags(const TokenSentence& t) {
  TokenSentence out;
  out.lang = t.lang;
  size_t i = 0;
  while (i < t.tokens.size() && is_tag(t.tokens[i])) ++i;
  out.tokens.assign(t.tokens.begin() + static_cast<long>(i), t.tokens.end());
  return out;
}

Corpus tag_corpus(const Corpus& corpus) {
  Corpus out;
  out.reserve(corpus.size());
  for (const auto& p : corpus) {
    SentencePair q = p;
    q.src = tag_sentence(p.src, p.origin, p.domain);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<size_t> audit_tags(const Corpus& corpus) {
  std::vector<size_t> bad;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const auto& p = corpus[i];
    if (p.src.tokens.size() < 2 || p.src.tokens[0] != origin_tag(p.origin) ||
        p.src.tokens[1] != domain_tag(p.domain))
      bad.push_back(i);
  }
  return bad;
}

// ------------------------------------------------------------ generation

void SamplingSpec::validate() const {
  if (mode == Mode::TOPP && !(p_low > 0.0 && p_low <= p_high && p_high <= 1.0))
    raise(Errc::invalid_arg, "need 0 < p_low <= p_high <= 1");
  if (beam_size < 1) raise(Errc::invalid_arg, "beam_size must be >= 1");
}

std::string SamplingSpec::to_json() const {
  json j;
  j["mode"] = mode == Mode::BEAM ? "BEAM" : "TOPP";
  j["beam_size"] = beam_size;
  j["p_low"] = p_low;
  j["p_high"] = p_high;
  j["seed"] = seed;
  j["max_len"] = max_len;
  return j.dump();
}

SamplingSpec SamplingSpec::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  SamplingSpec s;
  if (j.contains("mode")) s.mode = j["mode"] == "TOPP" ? Mode::TOPP : Mode::BEAM;
  s.beam_size = j.value("beam_size", s.beam_size);
  s.p_low = j.value("p_low", s.p_low);
  s.p_high = j.value("p_high", s.p_high);
  s.seed = j.value("seed", s.seed);
  s.max_len = j.value("max_len", s.max_len);
  s.validate();
  return s;
}

Corpus back_translate(const std::vector<TokenSentence>& mono_tgt,
                      const model::TranslationModel& reverse_model, const SamplingSpec& sampling,
                      Domain domain) {
  sampling.validate();
  Corpus out;
  out.reserve(mono_tgt.size());
  for (size_t i = 0; i < mono_tgt.size(); ++i) {
    const auto& sent = mono_tgt[i];
    if (sent.tokens.empty()) continue;
    std::vector<int> ids = reverse_model.src_vocab.encode(sent);
    std::vector<int> gen;
    if (sampling.mode == SamplingSpec::Mode::BEAM) {
      model::DecodeOptions opt;
      opt.beam = sampling.beam_size;
      opt.max_len = sampling.max_len;
      gen = model::beam_decode(reverse_model.params, ids, opt).tokens;
    } else {
      Rng rng(mix_seed(sampling.seed, i));
      model::SampleOptions opt;
      opt.top_p = rng.uniform(sampling.p_low, sampling.p_high);  // per-sentence draw
      opt.max_len = sampling.max_len;
      gen = model::nucleus_decode(reverse_model.params, ids, opt, rng).tokens;
    }
    while (!gen.empty() && gen.back() == model::Vocab::kEos) gen.pop_back();
    if (gen.empty()) continue;  // degenerate generation, nothing to pair
    SentencePair p;
    p.src = reverse_model.tgt_vocab.decode(gen, Lang::ZH);
    p.tgt = sent;
    p.origin = Origin::BT;
    p.domain = domain;
    out.push_back(std::move(p));
  }
  return out;
}

Corpus forward_translate(const std::vector<TokenSentence>& mono_src,
                         const std::vector<const model::TranslationModel*>& ensemble,
                         int beam_size, Domain domain) {
  if (ensemble.empty()) raise(Errc::invalid_arg, "forward_translate: empty ensemble");
  for (const auto* m : ensemble)
    if (!(m->src_vocab == ensemble[0]->src_vocab) || !(m->tgt_vocab == ensemble[0]->tgt_vocab))
      raise(Errc::vocab_mismatch, "forward_translate: ensemble vocabularies differ");

  std::vector<const model::Params*> members;
  for (const auto* m : ensemble) members.push_back(&m->params);

  Corpus out;
  out.reserve(mono_src.size());
  for (const auto& sent : mono_src) {
    if (sent.tokens.empty()) continue;
    std::vector<int> ids = ensemble[0]->src_vocab.encode(sent);
    model::DecodeOptions opt;
    opt.beam = beam_size;
    auto hyp = model::beam_decode(members, ids, opt);
    std::vector<int> gen = hyp.tokens;
    while (!gen.empty() && gen.back() == model::Vocab::kEos) gen.pop_back();
    if (gen.empty()) continue;
    SentencePair p;
    p.src = sent;
    p.tgt = ensemble[0]->tgt_vocab.decode(gen, Lang::EN);
    p.origin = Origin::FT;
    p.domain = domain;
    out.push_back(std::move(p));
  }
  return out;
}

Corpus distill(const Corpus& bitext, const model::TranslationModel& teacher, int beam_size) {
  Corpus out;
  out.reserve(bitext.size());
  model::DecodeOptions opt;
  opt.beam = beam_size;
  for (const auto& p : bitext) {
    SentencePair q = p;
    TokenSentence hyp = teacher.translate(p.src, opt);
    if (!hyp.tokens.empty()) q.tgt = hyp;
    out.push_back(std::move(q));
  }
  return out;
}

// ------------------------------------------------------------- multi BT

namespace {

Corpus swap_sides(const Corpus& corpus) {
  Corpus out;
  out.reserve(corpus.size());
  for (const auto& p : corpus) {
    SentencePair q;
    q.src = p.tgt;
    q.tgt = p.src;
    q.origin = p.origin;
    q.domain = p.domain;
    out.push_back(std::move(q));
  }
  return out;
}

// Generator models are trained on untagged text; tags are a feature for
// the student model, not for the synthetic-data generators.
Corpus untagged(const Corpus& corpus) {
  Corpus out;
  out.reserve(corpus.size());
  for (const auto& p : corpus) {
    SentencePair q = p;
    q.src = strip_tags(p.src);
    if (q.src.tokens.empty()) continue;
    out.push_back(std::move(q));
  }
  return out;
}

model::TranslationModel train_direction(const Corpus& corpus, model::ModelConfig cfg,
                                        model::TrainOptions train, uint64_t seed) {
  std::vector<std::string> reserved(default_protected().begin(), default_protected().end());
  std::vector<TokenSentence> src_side, tgt_side;
  for (const auto& p : corpus) {
    src_side.push_back(p.src);
    tgt_side.push_back(p.tgt);
  }
  model::TranslationModel m;
  m.src_vocab = model::Vocab::build(src_side, reserved);
  m.tgt_vocab = model::Vocab::build(tgt_side, reserved);
  cfg.src_vocab = m.src_vocab.size();
  cfg.tgt_vocab = m.tgt_vocab.size();
  m.cfg = cfg;
  m.params = model::Params::init(cfg, seed);
  train.seed = seed;
  auto data = model::encode_corpus(corpus, m.src_vocab, m.tgt_vocab);
  model::train_loop(m.params, data, train);
  return m;
}

}  // namespace

MultiBtResult iterate_bt(const Corpus& bitext, const std::vector<TokenSentence>& mono_src,
                         const std::vector<TokenSentence>& mono_tgt, int rounds,
                         const MultiBtConfig& cfg) {
  if (rounds < 1) raise(Errc::invalid_arg, "rounds must be >= 1");
  if (bitext.empty()) raise(Errc::empty_corpus, "iterate_bt: empty bitext");

  MultiBtResult result;
  result.corpus = bitext;

  auto shard_of = [rounds](const std::vector<TokenSentence>& mono, int r) {
    size_t n = mono.size();
    size_t lo = n * static_cast<size_t>(r) / static_cast<size_t>(rounds);
    size_t hi = n * static_cast<size_t>(r + 1) / static_cast<size_t>(rounds);
    return std::pair<size_t, size_t>{lo, hi};
  };

  for (int r = 0; r < rounds; ++r) {
    auto [lo, hi] = shard_of(mono_tgt, r);
    if (lo >= hi)
      raise(Errc::insufficient_mono,
            "round " + std::to_string(r) + ": monolingual shard is empty");
    std::vector<TokenSentence> shard(mono_tgt.begin() + static_cast<long>(lo),
                                     mono_tgt.begin() + static_cast<long>(hi));

    uint64_t round_seed = mix_seed(cfg.train.seed, static_cast<uint64_t>(r));
    Corpus plain = untagged(result.corpus);
    auto reverse_model = train_direction(swap_sides(plain), cfg.reverse_cfg, cfg.train, round_seed);

    SamplingSpec sampling = cfg.sampling;
    sampling.mode = (r % 2 == 0) ? SamplingSpec::Mode::BEAM : SamplingSpec::Mode::TOPP;
    sampling.seed = mix_seed(cfg.sampling.seed, static_cast<uint64_t>(r));

    Corpus bt = back_translate(shard, reverse_model, sampling, cfg.domain);
    RoundManifest man;
    man.round = r;
    man.strategy = sampling.mode == SamplingSpec::Mode::BEAM ? "beam" : "topp";
    man.shard_begin = lo;
    man.shard_end = hi;
    man.seed = sampling.seed;
    man.generated = bt.size();

    for (auto& p : bt) {
      p.src = tag_sentence(p.src, p.origin, p.domain);
      result.corpus.push_back(std::move(p));
    }

    if (cfg.include_forward && !mono_src.empty()) {
      auto [flo, fhi] = shard_of(mono_src, r);
      if (flo < fhi) {
        std::vector<TokenSentence> fshard(mono_src.begin() + static_cast<long>(flo),
                                          mono_src.begin() + static_cast<long>(fhi));
        auto forward_model =
            train_direction(untagged(result.corpus), cfg.forward_cfg, cfg.train,
                            mix_seed(round_seed, 1));
        Corpus ft = forward_translate(fshard, {&forward_model}, cfg.beam_size, cfg.domain);
        man.generated += ft.size();
        for (auto& p : ft) {
          p.src = tag_sentence(p.src, p.origin, p.domain);
          result.corpus.push_back(std::move(p));
        }
      }
    }
    result.manifests.push_back(std::move(man));
  }
  return result;
}

}  // namespace mtforge::augment
