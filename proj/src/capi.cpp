#include "mtforge.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "mtforge/augment.hpp"
#include "mtforge/decode.hpp"
#include "mtforge/error.hpp"
#include "mtforge/evalsel.hpp"
#include "mtforge/filter.hpp"
#include "mtforge/io.hpp"
#include "mtforge/pipeline.hpp"
#include "mtforge/subword.hpp"
#include "mtforge/text_norm.hpp"
#include "mtforge/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mtforge;

namespace {

thread_local std::string g_last_error;

mtf_code map_errc(Errc c) {
  switch (c) {
    case Errc::invalid_arg: return MTF_ERR_INVALID_ARG;
    case Errc::io: return MTF_ERR_IO;
    case Errc::parse: return MTF_ERR_PARSE;
    case Errc::empty_corpus: return MTF_ERR_EMPTY_CORPUS;
    case Errc::input_contains_marker:
    case Errc::dangling_marker: return MTF_ERR_MARKER;
    case Errc::dangling_continuation: return MTF_ERR_CONTINUATION;
    case Errc::already_tagged: return MTF_ERR_TAG;
    case Errc::insufficient_mono: return MTF_ERR_MONO;
    case Errc::vocab_out_of_range:
    case Errc::vocab_mismatch: return MTF_ERR_VOCAB;
    case Errc::non_finite_loss: return MTF_ERR_NONFINITE;
    case Errc::state_mismatch: return MTF_ERR_STATE;
    case Errc::length_mismatch: return MTF_ERR_LENGTH;
    case Errc::stage_failure: return MTF_ERR_STAGE;
    case Errc::digest_mismatch: return MTF_ERR_DIGEST;
    case Errc::lock_held: return MTF_ERR_LOCK;
    case Errc::internal: return MTF_ERR_INTERNAL;
  }
  return MTF_ERR_INTERNAL;
}

template <typename F>
mtf_code guarded(F&& f) {
  try {
    f();
    return MTF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return map_errc(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MTF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return MTF_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool cond, const char* what) {
  if (!cond) raise(Errc::invalid_arg, what);
}

model::TranslationModel load_ckpt(const char* path) {
  require(path != nullptr, "checkpoint path is null");
  return model::load_model(path);
}

}  // namespace

extern "C" {

const char* mtf_version(void) { return pipeline::tool_version(); }

const char* mtf_last_error(void) { return g_last_error.c_str(); }

void mtf_string_free(char* s) { std::free(s); }

/* ---------------------------------------------------------- text_norm */

struct mtf_textnorm {
  Lang lang;
  std::set<std::string> lexicon;
};

mtf_code mtf_textnorm_open(const char* lang, const char* lexicon_path, mtf_textnorm** out) {
  return guarded([&] {
    require(lang && out, "null argument");
    std::string l = lang;
    require(l == "zh" || l == "en", "lang must be zh or en");
    auto* h = new mtf_textnorm;
    h->lang = l == "zh" ? Lang::ZH : Lang::EN;
    if (lexicon_path) h->lexicon = text::load_lexicon(lexicon_path);
    *out = h;
  });
}

void mtf_textnorm_free(mtf_textnorm* h) { delete h; }

mtf_code mtf_textnorm_line(mtf_textnorm* h, const char* op, const char* line, char** out_line) {
  return guarded([&] {
    require(h && op && line && out_line, "null argument");
    std::string o = op;
    std::string result;
    if (o == "normalize") {
      result = text::normalize_punct({line, h->lang}).text;
    } else if (o == "tokenize") {
      if (h->lang == Lang::EN)
        result = join_tokens(text::tokenize_en({line, Lang::EN}));
      else
        result = join_tokens(text::segment_zh({line, Lang::ZH}, h->lexicon));
    } else if (o == "mark-case") {
      result = join_tokens(text::mark_case(split_tokens(line, h->lang)));
    } else if (o == "unmark-case") {
      result = join_tokens(text::unmark_case(split_tokens(line, h->lang)));
    } else if (o == "detok") {
      result = text::detokenize_en(split_tokens(line, Lang::EN)).text;
    } else {
      raise(Errc::invalid_arg, "unknown op: " + o);
    }
    *out_line = dup_string(result);
  });
}

/* ------------------------------------------------------------- filter */

mtf_code mtf_filter_run(const char* in_tsv, const char* out_tsv, const char* rules_json,
                        const char* model1_path, double drop_frac,
                        const char* report_json_path) {
  return guarded([&] {
    require(in_tsv && out_tsv, "null corpus path");
    filter::FilterRules rules;
    if (rules_json) rules = filter::FilterRules::from_json(io::read_file(rules_json));
    if (drop_frac >= 0.0) rules.align_drop_frac = drop_frac;
    filter::Model1Table table;
    const filter::Model1Table* table_ptr = nullptr;
    if (model1_path) {
      table = filter::Model1Table::load(model1_path);
      table_ptr = &table;
    }
    Corpus corpus = io::read_corpus_tsv(in_tsv);
    auto [kept, report] = filter::run_filters(corpus, rules, table_ptr);
    io::write_corpus_tsv(out_tsv, kept);
    if (report_json_path) io::write_file(report_json_path, report.to_json());
  });
}

mtf_code mtf_model1_train(const char* corpus_tsv, int iterations, const char* out_path) {
  return guarded([&] {
    require(corpus_tsv && out_path, "null path");
    auto table = filter::train_model1(io::read_corpus_tsv(corpus_tsv), iterations);
    table.save(out_path);
  });
}

mtf_code mtf_sentence_align(const char* src_doc_path, const char* tgt_doc_path,
                            const char* out_tsv) {
  return guarded([&] {
    require(src_doc_path && tgt_doc_path && out_tsv, "null path");
    std::vector<RawSentence> src, tgt;
    for (const auto& l : io::read_lines(src_doc_path)) src.push_back({l, Lang::ZH});
    for (const auto& l : io::read_lines(tgt_doc_path)) tgt.push_back({l, Lang::EN});
    std::vector<std::string> lines;
    for (const auto& bead : filter::align_beads(src, tgt)) {
      if (bead.src.size() != 1 || bead.tgt.size() != 1) continue;
      lines.push_back(std::to_string(bead.src[0]) + "\t" + std::to_string(bead.tgt[0]));
    }
    io::write_lines(out_tsv, lines);
  });
}

/* ---------------------------------------------------------------- bpe */

struct mtf_bpe {
  bpe::BpeModel model;
};

namespace {
std::set<std::string> load_protected(const char* path) {
  std::set<std::string> prot;
  if (path)
    for (const auto& l : io::read_lines(path))
      if (!l.empty()) prot.insert(l);
  return prot;
}
}  // namespace

mtf_code mtf_bpe_learn(const char* corpus_path, size_t n_ops, const char* protected_path,
                       const char* model_out_path) {
  return guarded([&] {
    require(corpus_path && model_out_path, "null path");
    std::vector<TokenSentence> corpus;
    for (const auto& l : io::read_lines(corpus_path)) {
      if (l.empty()) continue;
      // corpus may be plain lines or TSV pairs; count both sides
      auto tab = l.find('\t');
      if (tab == std::string::npos) {
        corpus.push_back(split_tokens(l, Lang::EN));
      } else {
        corpus.push_back(split_tokens(l.substr(0, tab), Lang::ZH));
        corpus.push_back(split_tokens(l.substr(tab + 1), Lang::EN));
      }
    }
    auto model = bpe::bpe_learn(corpus, n_ops, load_protected(protected_path));
    model.save(model_out_path);
  });
}

mtf_code mtf_bpe_open(const char* model_path, const char* protected_path, mtf_bpe** out) {
  return guarded([&] {
    require(model_path && out, "null argument");
    auto* h = new mtf_bpe;
    h->model = bpe::BpeModel::load(model_path);
    h->model.protected_tokens = load_protected(protected_path);
    *out = h;
  });
}

void mtf_bpe_free(mtf_bpe* h) { delete h; }

mtf_code mtf_bpe_apply_line(mtf_bpe* h, const char* line, char** out_line) {
  return guarded([&] {
    require(h && line && out_line, "null argument");
    *out_line = dup_string(join_tokens(bpe::bpe_apply(split_tokens(line, Lang::EN), h->model)));
  });
}

mtf_code mtf_bpe_undo_line(const char* line, char** out_line) {
  return guarded([&] {
    require(line && out_line, "null argument");
    *out_line = dup_string(join_tokens(bpe::bpe_undo(split_tokens(line, Lang::EN))));
  });
}

/* ------------------------------------------------------------ augment */

mtf_code mtf_augment_noise(const char* in_tsv, const char* out_tsv, const char* spec_json,
                           uint64_t seed) {
  return guarded([&] {
    require(in_tsv && out_tsv, "null path");
    augment::NoiseSpec spec;
    if (spec_json) spec = augment::noise_spec_from_json(io::read_file(spec_json));
    Corpus corpus = io::read_corpus_tsv(in_tsv);
    Corpus out;
    for (size_t i = 0; i < corpus.size(); ++i) {
      SentencePair p = corpus[i];
      augment::NoiseSpec s = spec;
      s.seed = mix_seed(seed ? seed : spec.seed, i);
      p.src = augment::apply_noise(p.src, s);
      p.origin = Origin::NOISE;
      out.push_back(std::move(p));
    }
    io::write_corpus_tsv(out_tsv, out);
  });
}

mtf_code mtf_augment_tag(const char* in_tsv, const char* out_tsv, const char* origin,
                         const char* domain) {
  return guarded([&] {
    require(in_tsv && out_tsv && origin && domain, "null argument");
    Origin o = origin_from_string(origin);
    Domain d = domain_from_string(domain);
    Corpus corpus = io::read_corpus_tsv(in_tsv, o, d);
    io::write_corpus_tsv(out_tsv, augment::tag_corpus(corpus));
  });
}

mtf_code mtf_augment_bt(const char* mono_path, const char* reverse_ckpt,
                        const char* sampling_json, const char* domain, const char* out_tsv) {
  return guarded([&] {
    require(mono_path && reverse_ckpt && out_tsv, "null path");
    augment::SamplingSpec spec;
    if (sampling_json) spec = augment::SamplingSpec::from_json(io::read_file(sampling_json));
    std::vector<TokenSentence> mono;
    for (const auto& l : io::read_lines(mono_path))
      if (!l.empty()) mono.push_back(split_tokens(l, Lang::EN));
    auto rev = load_ckpt(reverse_ckpt);
    Domain d = domain ? domain_from_string(domain) : Domain::BIO;
    io::write_corpus_tsv(out_tsv, augment::back_translate(mono, rev, spec, d));
  });
}

mtf_code mtf_augment_ft(const char* mono_path, const char* const* ckpts, size_t n_ckpts,
                        int beam, const char* domain, const char* out_tsv) {
  return guarded([&] {
    require(mono_path && ckpts && n_ckpts > 0 && out_tsv, "null argument");
    std::vector<model::TranslationModel> models;
    for (size_t i = 0; i < n_ckpts; ++i) models.push_back(load_ckpt(ckpts[i]));
    std::vector<const model::TranslationModel*> refs;
    for (const auto& m : models) refs.push_back(&m);
    std::vector<TokenSentence> mono;
    for (const auto& l : io::read_lines(mono_path))
      if (!l.empty()) mono.push_back(split_tokens(l, Lang::ZH));
    Domain d = domain ? domain_from_string(domain) : Domain::BIO;
    io::write_corpus_tsv(out_tsv, augment::forward_translate(mono, refs, beam, d));
  });
}

mtf_code mtf_augment_kd(const char* corpus_tsv, const char* teacher_ckpt, int beam,
                        const char* out_tsv) {
  return guarded([&] {
    require(corpus_tsv && teacher_ckpt && out_tsv, "null path");
    auto teacher = load_ckpt(teacher_ckpt);
    io::write_corpus_tsv(out_tsv,
                         augment::distill(io::read_corpus_tsv(corpus_tsv), teacher, beam));
  });
}

mtf_code mtf_augment_multi_bt(const char* bitext_tsv, const char* mono_src_path,
                              const char* mono_tgt_path, const char* config_json,
                              const char* out_tsv, const char* manifest_json_path) {
  return guarded([&] {
    require(bitext_tsv && mono_tgt_path && config_json && out_tsv, "null argument");
    json j = json::parse(io::read_file(config_json));
    augment::MultiBtConfig cfg;
    cfg.rounds = j.value("rounds", cfg.rounds);
    if (j.contains("model")) {
      cfg.forward_cfg = model::ModelConfig::from_json(j["model"].dump());
      cfg.reverse_cfg = cfg.forward_cfg;
    }
    if (j.contains("hyper"))
      cfg.train.hyper = model::TrainHyper::from_json(j["hyper"].dump());
    cfg.train.max_steps = j.value("train_steps", 200);
    cfg.train.seed = j.value("seed", 1);
    if (j.contains("sampling"))
      cfg.sampling = augment::SamplingSpec::from_json(j["sampling"].dump());
    cfg.include_forward = j.value("include_forward", mono_src_path != nullptr);
    cfg.domain = j.contains("domain") ? domain_from_string(j["domain"]) : Domain::BIO;

    Corpus bitext = io::read_corpus_tsv(bitext_tsv);
    std::vector<TokenSentence> mono_src, mono_tgt;
    if (mono_src_path)
      for (const auto& l : io::read_lines(mono_src_path))
        if (!l.empty()) mono_src.push_back(split_tokens(l, Lang::ZH));
    for (const auto& l : io::read_lines(mono_tgt_path))
      if (!l.empty()) mono_tgt.push_back(split_tokens(l, Lang::EN));

    auto result = augment::iterate_bt(bitext, mono_src, mono_tgt, cfg.rounds, cfg);
    io::write_corpus_tsv(out_tsv, result.corpus);
    if (manifest_json_path) {
      json rounds = json::array();
      for (const auto& m : result.manifests)
        rounds.push_back({{"round", m.round},
                          {"strategy", m.strategy},
                          {"shard", {m.shard_begin, m.shard_end}},
                          {"seed", m.seed},
                          {"generated", m.generated}});
      io::write_file(manifest_json_path, rounds.dump(2));
    }
  });
}

/* -------------------------------------------------------------- model */

struct mtf_model {
  model::TranslationModel m;
};

namespace {
void train_from_config(const char* config_json_path, const char* corpus_tsv,
                       const char* ckpt_in, const char* denoise_json, const char* ckpt_out) {
  json j = json::parse(io::read_file(config_json_path));
  model::TrainOptions opt;
  if (j.contains("hyper")) opt.hyper = model::TrainHyper::from_json(j["hyper"].dump());
  opt.max_steps = j.value("train_steps", 500);
  opt.seed = j.value("seed", 1);
  opt.lr_scale = j.value("lr_scale", 1.0);
  opt.log_every = j.value("log_every", 0);
  if (denoise_json)
    opt.target_denoise = augment::noise_spec_from_json(io::read_file(denoise_json));

  Corpus corpus = io::read_corpus_tsv(corpus_tsv);
  model::TranslationModel m;
  if (ckpt_in) {
    m = model::load_model(ckpt_in);
  } else {
    model::ModelConfig cfg =
        j.contains("model") ? model::ModelConfig::from_json(j["model"].dump())
                            : model::ModelConfig{};
    if (cfg.dec_plan.empty()) cfg.dec_plan.assign(cfg.dec_layers, model::LayerKind::Self);
    std::vector<std::string> reserved(augment::default_protected().begin(),
                                      augment::default_protected().end());
    std::vector<TokenSentence> src_side, tgt_side;
    for (const auto& p : corpus) {
      src_side.push_back(p.src);
      tgt_side.push_back(p.tgt);
    }
    m.src_vocab = model::Vocab::build(src_side, reserved);
    m.tgt_vocab = model::Vocab::build(tgt_side, reserved);
    cfg.src_vocab = m.src_vocab.size();
    cfg.tgt_vocab = m.tgt_vocab.size();
    m.cfg = cfg;
    m.params = model::Params::init(cfg, opt.seed);
  }
  auto data = model::encode_corpus(corpus, m.src_vocab, m.tgt_vocab);
  model::train_loop(m.params, data, opt);
  model::save_model(ckpt_out, m);
}
}  // namespace

mtf_code mtf_model_train(const char* config_json_path, const char* corpus_tsv,
                         const char* ckpt_out) {
  return guarded([&] {
    require(config_json_path && corpus_tsv && ckpt_out, "null path");
    train_from_config(config_json_path, corpus_tsv, nullptr, nullptr, ckpt_out);
  });
}

mtf_code mtf_model_finetune(const char* config_json_path, const char* corpus_tsv,
                            const char* ckpt_in, const char* denoise_json,
                            const char* ckpt_out) {
  return guarded([&] {
    require(config_json_path && corpus_tsv && ckpt_in && ckpt_out, "null path");
    train_from_config(config_json_path, corpus_tsv, ckpt_in, denoise_json, ckpt_out);
  });
}

mtf_code mtf_model_open(const char* ckpt_path, mtf_model** out) {
  return guarded([&] {
    require(ckpt_path && out, "null argument");
    auto* h = new mtf_model{load_ckpt(ckpt_path)};
    *out = h;
  });
}

void mtf_model_free(mtf_model* h) { delete h; }

mtf_code mtf_model_translate_line(mtf_model* h, const char* line, int beam, char** out_line) {
  return guarded([&] {
    require(h && line && out_line, "null argument");
    model::DecodeOptions opt;
    opt.beam = beam > 0 ? beam : 4;
    TokenSentence out = h->m.translate(split_tokens(line, Lang::ZH), opt);
    *out_line = dup_string(join_tokens(out));
  });
}

mtf_code mtf_model_gradcheck(const char* plan, uint64_t seed, int samples, double eps,
                             double* max_rel_err) {
  return guarded([&] {
    require(plan && max_rel_err, "null argument");
    model::ModelConfig cfg;
    cfg.enc_layers = 1;
    cfg.dec_layers = 2;
    cfg.hidden = 12;
    cfg.ffn = 16;
    cfg.heads = 2;
    cfg.src_vocab = 11;
    cfg.tgt_vocab = 13;
    cfg.max_len = 16;
    cfg.dec_plan = model::layer_plan(model::arch_from_string(plan), cfg.dec_layers);
    auto result = model::grad_check(cfg, seed, samples > 0 ? samples : 200,
                                    eps > 0 ? eps : 1e-4);
    *max_rel_err = result.max_rel_err;
  });
}

/* --------------------------------------------------------------- eval */

namespace {
std::vector<TokenSentence> read_sentences(const char* path) {
  std::vector<TokenSentence> out;
  for (const auto& l : io::read_lines(path)) out.push_back(split_tokens(l, Lang::EN));
  return out;
}
}  // namespace

mtf_code mtf_eval_bleu(const char* hyp_path, const char* ref_path, double* score,
                       char** detail_json) {
  return guarded([&] {
    require(hyp_path && ref_path && score, "null argument");
    auto bleu = eval::corpus_bleu(read_sentences(hyp_path), read_sentences(ref_path));
    *score = bleu.score;
    if (detail_json) *detail_json = dup_string(bleu.to_json());
  });
}

mtf_code mtf_eval_self_bleu(const char* outputs_dir, const char* matrix_json_out) {
  return guarded([&] {
    require(outputs_dir && matrix_json_out, "null path");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(outputs_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".txt")
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    std::vector<eval::CandidateModel> cands;
    for (const auto& f : files) {
      eval::CandidateModel c;
      c.id = fs::path(f).stem().string();
      c.dev_outputs = read_sentences(f.c_str());
      cands.push_back(std::move(c));
    }
    auto matrix = eval::self_bleu_matrix(cands);
    io::write_file(matrix_json_out, matrix.to_json());
  });
}

mtf_code mtf_eval_select(const char* matrix_json_path, const char* dev_bleu_tsv, size_t k,
                         double lambda, char** selected_json) {
  return guarded([&] {
    require(matrix_json_path && dev_bleu_tsv && selected_json, "null argument");
    auto matrix = eval::SelfBleuMatrix::from_json(io::read_file(matrix_json_path));
    std::map<std::string, double> by_id;
    for (const auto& l : io::read_lines(dev_bleu_tsv)) {
      if (l.empty()) continue;
      auto tab = l.find('\t');
      require(tab != std::string::npos, "dev-bleu line missing TAB");
      by_id[l.substr(0, tab)] = std::stod(l.substr(tab + 1));
    }
    std::vector<double> bleus;
    for (const auto& id : matrix.ids) {
      auto it = by_id.find(id);
      require(it != by_id.end(), "dev-bleu file missing an id from the matrix");
      bleus.push_back(it->second);
    }
    auto chosen = eval::select_ensemble(bleus, matrix, k, lambda);
    json out = json::array();
    for (size_t i : chosen) out.push_back(matrix.ids[i]);
    *selected_json = dup_string(out.dump());
  });
}

/* ----------------------------------------------------------- pipeline */

mtf_code mtf_pipeline_run(const char* config_json_path, int resume, const char* until,
                          char** chain_digest) {
  return guarded([&] {
    require(config_json_path != nullptr, "null config path");
    auto cfg = pipeline::PipelineConfig::from_json(io::read_file(config_json_path));
    auto result = pipeline::run_pipeline(cfg, resume != 0, until ? until : "");
    if (chain_digest) *chain_digest = dup_string(result.chain_digest);
  });
}

} /* extern "C" */
