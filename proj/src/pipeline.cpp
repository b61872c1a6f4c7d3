#include "mtforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtforge/decode.hpp"
#include "mtforge/error.hpp"
#include "mtforge/evalsel.hpp"
#include "mtforge/io.hpp"
#include "mtforge/subword.hpp"
#include "mtforge/text_norm.hpp"
#include "mtforge/toy_task.hpp"
#include "mtforge/train.hpp"

namespace mtforge::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* tool_version() { return "mtforge 0.1.0"; }

const std::vector<std::string> kStageOrder = {
    "filter", "prep",     "bpe",   "tag",      "train_base", "bt",       "kd",
    "ft",     "multi_bt", "noise", "finetune", "finetune_denoise", "ensemble"};

// ------------------------------------------------------------- config

PipelineConfig PipelineConfig::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  PipelineConfig c;
  c.work_dir = j.value("work_dir", c.work_dir);
  c.seed = j.value("seed", c.seed);
  c.stages = j.value("stages", kStageOrder);
  for (const auto& s : c.stages)
    if (std::find(kStageOrder.begin(), kStageOrder.end(), s) == kStageOrder.end())
      raise(Errc::parse, "unknown stage: " + s);

  if (j.contains("toy")) {
    ToyDataSpec t;
    const auto& jt = j["toy"];
    t.vocab = jt.value("vocab", t.vocab);
    t.train_pairs = jt.value("train_pairs", t.train_pairs);
    t.mono_src = jt.value("mono_src", t.mono_src);
    t.mono_tgt = jt.value("mono_tgt", t.mono_tgt);
    t.indomain_pairs = jt.value("indomain_pairs", t.indomain_pairs);
    t.dev = jt.value("dev", t.dev);
    c.toy = t;
  }
  c.bitext_path = j.value("bitext", c.bitext_path);
  c.mono_src_path = j.value("mono_src", c.mono_src_path);
  c.mono_tgt_path = j.value("mono_tgt", c.mono_tgt_path);
  c.indomain_path = j.value("indomain", c.indomain_path);
  c.dev_src_path = j.value("dev_src", c.dev_src_path);
  c.dev_ref_path = j.value("dev_ref", c.dev_ref_path);

  if (j.contains("filter_rules")) c.filter_rules = filter::FilterRules::from_json(j["filter_rules"].dump());
  c.bpe_ops = j.value("bpe_ops", c.bpe_ops);
  if (j.contains("model")) c.arch = model::ModelConfig::from_json(j["model"].dump());
  if (j.contains("hyper")) c.hyper = model::TrainHyper::from_json(j["hyper"].dump());
  c.train_steps = j.value("train_steps", c.train_steps);
  c.finetune_steps = j.value("finetune_steps", c.finetune_steps);
  c.finetune_lr_scale = j.value("finetune_lr_scale", c.finetune_lr_scale);
  if (j.contains("denoise")) c.denoise = augment::noise_spec_from_json(j["denoise"].dump());
  if (j.contains("bt_sampling"))
    c.bt_sampling = augment::SamplingSpec::from_json(j["bt_sampling"].dump());
  c.multi_bt_rounds = j.value("multi_bt_rounds", c.multi_bt_rounds);
  c.multi_bt_steps = j.value("multi_bt_steps", c.multi_bt_steps);
  if (j.contains("source_noise"))
    c.source_noise = augment::noise_spec_from_json(j["source_noise"].dump());
  c.noise_real_fraction = j.value("noise_real_fraction", c.noise_real_fraction);
  c.pool_size = j.value("pool_size", c.pool_size);
  c.ensemble_k = j.value("ensemble_k", c.ensemble_k);
  c.ensemble_lambda = j.value("ensemble_lambda", c.ensemble_lambda);
  c.beam = j.value("beam", c.beam);
  return c;
}

std::string PipelineConfig::to_json() const {
  json j;
  j["work_dir"] = work_dir;
  j["seed"] = seed;
  j["stages"] = stages;
  if (toy) {
    j["toy"] = {{"vocab", toy->vocab},
                {"train_pairs", toy->train_pairs},
                {"mono_src", toy->mono_src},
                {"mono_tgt", toy->mono_tgt},
                {"indomain_pairs", toy->indomain_pairs},
                {"dev", toy->dev}};
  }
  j["bpe_ops"] = bpe_ops;
  j["model"] = json::parse(arch.to_json());
  j["hyper"] = json::parse(hyper.to_json());
  j["train_steps"] = train_steps;
  j["finetune_steps"] = finetune_steps;
  j["finetune_lr_scale"] = finetune_lr_scale;
  j["multi_bt_rounds"] = multi_bt_rounds;
  j["multi_bt_steps"] = multi_bt_steps;
  j["pool_size"] = pool_size;
  j["ensemble_k"] = ensemble_k;
  j["ensemble_lambda"] = ensemble_lambda;
  j["beam"] = beam;
  return j.dump(2);
}

// ------------------------------------------------------------- report

std::string AblationReport::render_text() const {
  size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::ostringstream out;
  out << "System";
  out << std::string(width - 6 + 2, ' ') << "  BLEU\n";
  for (const auto& r : rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.2f", r.bleu);
    out << r.label << std::string(width - r.label.size() + 2, ' ') << buf
        << (r.starred ? "*" : "") << "\n";
  }
  return out.str();
}

std::string AblationReport::render_json() const {
  json rows_json = json::array();
  for (const auto& r : rows)
    rows_json.push_back({{"label", r.label}, {"bleu", r.bleu}, {"starred", r.starred}});
  return json{{"rows", rows_json}}.dump(2);
}

std::string StageManifest::to_json() const {
  json j;
  j["stage"] = stage;
  j["seed"] = seed;
  j["wall_ms"] = wall_ms;
  j["tool_version"] = tool_version;
  json in = json::array(), out = json::array();
  for (const auto& [p, d] : inputs) in.push_back({{"path", p}, {"digest", d}});
  for (const auto& [p, d] : outputs) out.push_back({{"path", p}, {"digest", d}});
  j["inputs"] = in;
  j["outputs"] = out;
  return j.dump(2);
}

// ---------------------------------------------------------- execution

namespace {

struct DirLock {
  fs::path path;
  explicit DirLock(const fs::path& dir) : path(dir / ".lock") {
    if (fs::exists(path))
      raise(Errc::lock_held, "pipeline directory is locked: " + path.string());
    io::write_file(path.string(), "locked\n");
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

std::vector<TokenSentence> read_token_lines(const std::string& path, Lang lang) {
  std::vector<TokenSentence> out;
  for (const auto& line : io::read_lines(path)) {
    if (line.empty()) continue;
    out.push_back(split_tokens(line, lang));
  }
  return out;
}

void write_token_lines(const std::string& path, const std::vector<TokenSentence>& sents) {
  std::vector<std::string> lines;
  lines.reserve(sents.size());
  for (const auto& s : sents) lines.push_back(join_tokens(s));
  io::write_lines(path, lines);
}

std::vector<std::string> reserved_tokens() {
  const auto& prot = augment::default_protected();
  std::vector<std::string> out(prot.begin(), prot.end());
  out.push_back(augment::kUnkToken);
  return out;
}

// Executes stages with digest-chained manifests and resume support.
class Runner {
 public:
  Runner(const PipelineConfig& cfg, bool resume) : cfg_(cfg), resume_(resume) {
    dir_ = fs::path(cfg.work_dir);
  }

  // `body` must (re)create every path in `outputs`.
  void stage(const std::string& name, const std::vector<std::string>& inputs,
             const std::vector<std::string>& outputs, uint64_t seed,
             const std::function<void()>& body) {
    StageManifest man;
    man.stage = name;
    man.seed = seed;
    man.tool_version = tool_version();
    for (const auto& in : inputs) man.inputs.emplace_back(in, io::digest_file(in).hex());

    fs::path man_path = dir_ / (name + ".manifest.json");
    if (resume_ && fs::exists(man_path)) {
      json old = json::parse(io::read_file(man_path.string()));
      bool inputs_match = true;
      {
        json in = json::array();
        for (const auto& [p, d] : man.inputs) in.push_back({{"path", p}, {"digest", d}});
        inputs_match = old["inputs"] == in;
      }
      if (inputs_match) {
        bool all_present = true;
        for (const auto& rec : old["outputs"]) {
          std::string path = rec["path"];
          if (!fs::exists(path)) {
            all_present = false;
            break;
          }
          if (io::digest_file(path).hex() != rec["digest"].get<std::string>())
            raise(Errc::digest_mismatch, name + ": output drifted from manifest: " + path);
        }
        if (all_present) {
          man.wall_ms = old.value("wall_ms", 0.0);
          for (const auto& rec : old["outputs"])
            man.outputs.emplace_back(rec["path"].get<std::string>(),
                                     rec["digest"].get<std::string>());
          manifests.push_back(std::move(man));
          return;  // stage skipped
        }
      }
    }

    auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const Error& e) {
      if (e.code() == Errc::digest_mismatch || e.code() == Errc::lock_held) throw;
      raise(Errc::stage_failure, name + ": " + e.what());
    } catch (const std::exception& e) {
      raise(Errc::stage_failure, name + ": " + e.what());
    }
    man.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    for (const auto& out : outputs) man.outputs.emplace_back(out, io::digest_file(out).hex());
    io::write_file(man_path.string(), man.to_json());
    manifests.push_back(std::move(man));
  }

  std::vector<StageManifest> manifests;

 private:
  const PipelineConfig& cfg_;
  bool resume_;
  fs::path dir_;
};

// Shared run state rebuilt from files so resumed runs see the same world.
struct RunState {
  fs::path dir;
  bpe::BpeModel bpe_src, bpe_tgt;
  std::string train_path;       // cumulative tagged training corpus
  std::string real_tagged_path; // tagged real data only (for KD)
  std::string model_path;       // latest checkpoint
};

Corpus load_corpus(const std::string& path, Origin origin = Origin::REAL,
                   Domain domain = Domain::BIO) {
  return io::read_corpus_tsv(path, origin, domain);
}

model::TranslationModel train_on(const PipelineConfig& cfg, const Corpus& corpus,
                                 model::ModelConfig arch, int steps, uint64_t seed) {
  model::TranslationModel m;
  std::vector<TokenSentence> src_side, tgt_side;
  for (const auto& p : corpus) {
    src_side.push_back(p.src);
    tgt_side.push_back(p.tgt);
  }
  auto reserved = reserved_tokens();
  m.src_vocab = model::Vocab::build(src_side, reserved);
  m.tgt_vocab = model::Vocab::build(tgt_side, reserved);
  arch.src_vocab = m.src_vocab.size();
  arch.tgt_vocab = m.tgt_vocab.size();
  m.cfg = arch;
  m.params = model::Params::init(arch, seed);
  model::TrainOptions opt;
  opt.hyper = cfg.hyper;
  opt.max_steps = steps;
  opt.seed = seed;
  auto data = model::encode_corpus(corpus, m.src_vocab, m.tgt_vocab);
  model::train_loop(m.params, data, opt);
  return m;
}

// Finetune keeps the warm model's vocabularies, so re-encode with them.
model::TranslationModel finetune_model(const PipelineConfig& cfg,
                                       const model::TranslationModel& base, const Corpus& corpus,
                                       int steps, uint64_t seed,
                                       std::optional<augment::NoiseSpec> denoise) {
  model::TranslationModel m = base;
  model::TrainOptions opt;
  opt.hyper = cfg.hyper;
  opt.max_steps = steps;
  opt.seed = seed;
  opt.lr_scale = cfg.finetune_lr_scale;
  opt.target_denoise = denoise;
  auto data = model::encode_corpus(corpus, m.src_vocab, m.tgt_vocab);
  model::train_loop(m.params, data, opt);
  return m;
}

struct DevSet {
  std::vector<TokenSentence> src_raw;  // ZH tokens, unprepped
  std::vector<TokenSentence> ref_raw;  // EN tokens, unprepped
};

// Inference-side preparation: BPE the source and tag it <REAL> <BIO>.
TokenSentence prep_dev_source(const TokenSentence& src, const RunState& st) {
  TokenSentence prepped = bpe::bpe_apply(src, st.bpe_src);
  TokenSentence tagged = augment::tag_sentence(prepped, Origin::REAL, Domain::BIO);
  // final-decode contract: the first two tokens are always <REAL> <BIO>
  if (tagged.tokens.size() < 2 || tagged.tokens[0] != "<REAL>" || tagged.tokens[1] != "<BIO>")
    raise(Errc::internal, "final-decode input missing <REAL> <BIO> tags");
  return tagged;
}

TokenSentence postprocess_hyp(const TokenSentence& hyp) {
  return text::unmark_case(bpe::bpe_undo(hyp));
}

double eval_dev(const std::vector<const model::TranslationModel*>& models, const DevSet& dev,
                const RunState& st, int beam, const std::string& hyp_out_path) {
  std::vector<TokenSentence> hyps;
  hyps.reserve(dev.src_raw.size());
  model::DecodeOptions opt;
  opt.beam = beam;
  for (const auto& src : dev.src_raw) {
    TokenSentence tagged = prep_dev_source(src, st);
    TokenSentence hyp = eval::ensemble_decode(models, tagged, opt);
    hyps.push_back(postprocess_hyp(hyp));
  }
  write_token_lines(hyp_out_path, hyps);
  return eval::corpus_bleu(hyps, dev.ref_raw).score;
}

Corpus prep_corpus(const Corpus& in) {
  Corpus out;
  out.reserve(in.size());
  for (const auto& p : in) {
    SentencePair q = p;
    q.tgt = text::mark_case(p.tgt);
    out.push_back(std::move(q));
  }
  return out;
}

Corpus bpe_corpus(const Corpus& in, const bpe::BpeModel& src_model,
                  const bpe::BpeModel& tgt_model) {
  Corpus out;
  out.reserve(in.size());
  for (const auto& p : in) {
    SentencePair q = p;
    q.src = bpe::bpe_apply(p.src, src_model);
    q.tgt = bpe::bpe_apply(p.tgt, tgt_model);
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, bool resume, const std::string& until) {
  fs::create_directories(cfg.work_dir);
  DirLock lock(cfg.work_dir);
  Runner runner(cfg, resume);
  RunState st;
  st.dir = fs::path(cfg.work_dir);
  fs::create_directories(st.dir / "data");

  auto path = [&](const std::string& rel) { return (st.dir / rel).string(); };
  auto enabled = [&](const std::string& name) {
    return std::find(cfg.stages.begin(), cfg.stages.end(), name) != cfg.stages.end();
  };

  AblationReport report;
  auto add_row = [&](const std::string& label, double bleu, bool starred = false) {
    report.rows.push_back({label, bleu, starred});
  };

  // ---- data setup (always on; generates or copies the corpus files)
  std::string bitext = path("data/bitext.tsv");
  std::string mono_src = path("data/mono_src.txt");
  std::string mono_bt = path("data/mono_tgt_bt.txt");
  std::string mono_multi = path("data/mono_tgt_multi.txt");
  std::string indomain = path("data/indomain.tsv");
  std::string dev_src = path("data/dev_src.txt");
  std::string dev_ref = path("data/dev_ref.txt");
  {
    std::string cfg_snapshot = path("data/config.json");
    io::write_file(cfg_snapshot, cfg.to_json());
    runner.stage(
        "setup", {cfg_snapshot},
        {bitext, mono_src, mono_bt, mono_multi, indomain, dev_src, dev_ref}, cfg.seed, [&] {
          if (cfg.toy) {
            toy::ToyTaskSpec general{cfg.toy->vocab, 3, 9, cfg.seed, Domain::NEWS};
            toy::ToyTaskSpec bio{cfg.toy->vocab, 3, 9, cfg.seed, Domain::BIO};
            io::write_corpus_tsv(bitext, toy::make_corpus(general, cfg.toy->train_pairs, 1));
            write_token_lines(mono_src, toy::make_mono_src(general, cfg.toy->mono_src, 2));
            auto mono = toy::make_mono_tgt(bio, cfg.toy->mono_tgt, 3);
            size_t half = mono.size() / 2;
            write_token_lines(mono_bt, {mono.begin(), mono.begin() + static_cast<long>(half)});
            write_token_lines(mono_multi, {mono.begin() + static_cast<long>(half), mono.end()});
            io::write_corpus_tsv(indomain, toy::make_corpus(bio, cfg.toy->indomain_pairs, 4));
            Corpus dev = toy::make_corpus(bio, cfg.toy->dev, 5);
            std::vector<TokenSentence> ds, dr;
            for (const auto& p : dev) {
              ds.push_back(p.src);
              dr.push_back(p.tgt);
            }
            write_token_lines(dev_src, ds);
            write_token_lines(dev_ref, dr);
          } else {
            fs::copy_file(cfg.bitext_path, bitext, fs::copy_options::overwrite_existing);
            fs::copy_file(cfg.mono_src_path, mono_src, fs::copy_options::overwrite_existing);
            auto mono = read_token_lines(cfg.mono_tgt_path, Lang::EN);
            size_t half = mono.size() / 2;
            write_token_lines(mono_bt, {mono.begin(), mono.begin() + static_cast<long>(half)});
            write_token_lines(mono_multi, {mono.begin() + static_cast<long>(half), mono.end()});
            fs::copy_file(cfg.indomain_path, indomain, fs::copy_options::overwrite_existing);
            fs::copy_file(cfg.dev_src_path, dev_src, fs::copy_options::overwrite_existing);
            fs::copy_file(cfg.dev_ref_path, dev_ref, fs::copy_options::overwrite_existing);
          }
        });
  }

  DevSet dev;
  dev.src_raw = read_token_lines(dev_src, Lang::ZH);
  dev.ref_raw = read_token_lines(dev_ref, Lang::EN);

  auto stop_after = [&](const std::string& name) {
    return !until.empty() && until == name;
  };
  auto finish = [&]() {
    PipelineResult result;
    result.report = report;
    result.manifests = runner.manifests;
    std::string chain;
    for (const auto& m : result.manifests)
      for (const auto& [p, d] : m.outputs) chain += m.stage + ":" + p + ":" + d + "\n";
    result.chain_digest = io::digest_bytes(chain).hex();
    io::write_file((st.dir / "manifest.json").string(), [&] {
      json j;
      j["chain_digest"] = result.chain_digest;
      json stages = json::array();
      for (const auto& m : result.manifests) stages.push_back(json::parse(m.to_json()));
      j["stages"] = stages;
      return j.dump(2);
    }());
    if (!report.rows.empty()) {
      io::write_file((st.dir / "report.txt").string(), report.render_text());
      io::write_file((st.dir / "report.json").string(), report.render_json());
    }
    return result;
  };

  // ---- filter
  std::string filtered = path("filter/filtered.tsv");
  std::string filtered_ind = path("filter/indomain.tsv");
  if (enabled("filter")) {
    fs::create_directories(st.dir / "filter");
    runner.stage("filter", {bitext, indomain},
                 {filtered, filtered_ind, path("filter/report.json")}, cfg.seed, [&] {
                   Corpus corpus = load_corpus(bitext, Origin::REAL, Domain::NEWS);
                   filter::Model1Table m1;
                   const filter::Model1Table* m1p = nullptr;
                   if (cfg.filter_rules.align_drop_frac > 0.0) {
                     m1 = filter::train_model1(corpus, 5);
                     m1p = &m1;
                   }
                   auto [kept, rep] = filter::run_filters(corpus, cfg.filter_rules, m1p);
                   io::write_corpus_tsv(filtered, kept);
                   Corpus ind = load_corpus(indomain, Origin::REAL, Domain::BIO);
                   auto [kept_ind, rep_ind] = filter::run_filters(ind, cfg.filter_rules, m1p);
                   io::write_corpus_tsv(filtered_ind, kept_ind);
                   io::write_file(path("filter/report.json"), rep.to_json());
                 });
  } else {
    filtered = bitext;
    filtered_ind = indomain;
  }
  if (stop_after("filter")) return finish();

  // ---- prep (case marking on the English side)
  std::string prepped = path("prep/real.tsv");
  std::string prepped_ind = path("prep/indomain.tsv");
  if (enabled("prep")) {
    fs::create_directories(st.dir / "prep");
    runner.stage("prep", {filtered, filtered_ind}, {prepped, prepped_ind}, cfg.seed, [&] {
      io::write_corpus_tsv(prepped, prep_corpus(load_corpus(filtered, Origin::REAL, Domain::NEWS)));
      io::write_corpus_tsv(prepped_ind,
                           prep_corpus(load_corpus(filtered_ind, Origin::REAL, Domain::BIO)));
    });
  } else {
    prepped = filtered;
    prepped_ind = filtered_ind;
  }
  if (stop_after("prep")) return finish();

  // ---- bpe
  std::string bpe_src_path = path("bpe/src.model");
  std::string bpe_tgt_path = path("bpe/tgt.model");
  std::string bpe_real = path("bpe/real.tsv");
  std::string bpe_ind = path("bpe/indomain.tsv");
  const auto protected_set = augment::default_protected();
  if (enabled("bpe")) {
    fs::create_directories(st.dir / "bpe");
    runner.stage("bpe", {prepped, prepped_ind},
                 {bpe_src_path, bpe_tgt_path, bpe_real, bpe_ind}, cfg.seed, [&] {
                   Corpus real = load_corpus(prepped, Origin::REAL, Domain::NEWS);
                   Corpus ind = load_corpus(prepped_ind, Origin::REAL, Domain::BIO);
                   std::vector<TokenSentence> src_side, tgt_side;
                   for (const auto* c : {&real, &ind})
                     for (const auto& p : *c) {
                       src_side.push_back(p.src);
                       tgt_side.push_back(p.tgt);
                     }
                   auto src_model = bpe::bpe_learn(src_side, cfg.bpe_ops, protected_set);
                   auto tgt_model = bpe::bpe_learn(tgt_side, cfg.bpe_ops, protected_set);
                   src_model.save(bpe_src_path);
                   tgt_model.save(bpe_tgt_path);
                   io::write_corpus_tsv(bpe_real, bpe_corpus(real, src_model, tgt_model));
                   io::write_corpus_tsv(bpe_ind, bpe_corpus(ind, src_model, tgt_model));
                 });
    st.bpe_src = bpe::BpeModel::load(bpe_src_path);
    st.bpe_src.protected_tokens = protected_set;
    st.bpe_tgt = bpe::BpeModel::load(bpe_tgt_path);
    st.bpe_tgt.protected_tokens = protected_set;
  } else {
    bpe_real = prepped;
    bpe_ind = prepped_ind;
    st.bpe_src.protected_tokens = protected_set;
    st.bpe_tgt.protected_tokens = protected_set;
  }
  if (stop_after("bpe")) return finish();

  // ---- tag
  std::string tagged_real = path("tag/real.tsv");
  std::string tagged_ind = path("tag/indomain.tsv");
  std::string train0 = path("tag/train.tsv");
  fs::create_directories(st.dir / "tag");
  if (enabled("tag")) {
    runner.stage("tag", {bpe_real, bpe_ind}, {tagged_real, tagged_ind, train0}, cfg.seed, [&] {
      Corpus real = augment::tag_corpus(load_corpus(bpe_real, Origin::REAL, Domain::NEWS));
      Corpus ind = augment::tag_corpus(load_corpus(bpe_ind, Origin::REAL, Domain::BIO));
      io::write_corpus_tsv(tagged_real, real);
      io::write_corpus_tsv(tagged_ind, ind);
      Corpus train = real;
      train.insert(train.end(), ind.begin(), ind.end());
      io::write_corpus_tsv(train0, train);
    });
  } else {
    // untagged variant: concatenate the prepared corpora as they are
    runner.stage("tag_passthrough", {bpe_real, bpe_ind}, {tagged_real, tagged_ind, train0},
                 cfg.seed, [&] {
                   Corpus real = load_corpus(bpe_real, Origin::REAL, Domain::NEWS);
                   Corpus ind = load_corpus(bpe_ind, Origin::REAL, Domain::BIO);
                   io::write_corpus_tsv(tagged_real, real);
                   io::write_corpus_tsv(tagged_ind, ind);
                   Corpus train = real;
                   train.insert(train.end(), ind.begin(), ind.end());
                   io::write_corpus_tsv(train0, train);
                 });
  }
  st.train_path = train0;
  st.real_tagged_path = tagged_real;
  if (stop_after("tag")) return finish();

  int stage_index = 0;
  auto train_stage = [&](const std::string& name, const std::string& label,
                         const std::function<Corpus(const Corpus&)>& add_data) {
    if (!enabled(name)) return;
    fs::create_directories(st.dir / name);
    std::string corpus_out = path(name + "/corpus.tsv");
    std::string ckpt = path(name + "/model.ckpt");
    std::string hyp = path(name + "/dev_hyp.txt");
    std::string row_path = path(name + "/row.json");
    uint64_t seed = mix_seed(cfg.seed, static_cast<uint64_t>(++stage_index));
    runner.stage(name, {st.train_path, dev_src, dev_ref}, {corpus_out, ckpt, hyp, row_path}, seed,
                 [&] {
                   Corpus current = load_corpus(st.train_path);
                   Corpus next = add_data(current);
                   io::write_corpus_tsv(corpus_out, next);
                   auto m = train_on(cfg, next, cfg.arch, cfg.train_steps, seed);
                   model::save_model(ckpt, m);
                   double bleu = eval_dev({&m}, dev, st, cfg.beam, hyp);
                   io::write_file(row_path, json{{"label", label}, {"bleu", bleu}}.dump());
                 });
    json row = json::parse(io::read_file(row_path));
    add_row(row["label"], row["bleu"]);
    st.train_path = corpus_out;
    st.model_path = ckpt;
  };

  // ---- baseline
  train_stage("train_base", "Baseline", [&](const Corpus& cur) { return cur; });
  if (stop_after("train_base")) return finish();

  // ---- back-translation
  train_stage("bt", "+ Back-Translation", [&](const Corpus& cur) {
    auto mono = read_token_lines(mono_bt, Lang::EN);
    for (auto& s : mono) s = bpe::bpe_apply(text::mark_case(s), st.bpe_tgt);
    Corpus plain;
    for (const auto& p : cur) {
      SentencePair q = p;
      q.src = augment::strip_tags(p.src);
      plain.push_back(std::move(q));
    }
    Corpus swapped;
    for (const auto& p : plain) {
      SentencePair q;
      q.src = p.tgt;
      q.tgt = p.src;
      swapped.push_back(std::move(q));
    }
    model::ModelConfig rev_arch = cfg.arch;
    auto rev =
        train_on(cfg, swapped, rev_arch, cfg.multi_bt_steps, mix_seed(cfg.seed, 0xB7));
    auto bt_pairs = augment::back_translate(mono, rev, cfg.bt_sampling, Domain::BIO);
    Corpus next = cur;
    for (auto& p : bt_pairs) {
      p.src = augment::tag_sentence(p.src, p.origin, p.domain);
      next.push_back(std::move(p));
    }
    return next;
  });
  if (stop_after("bt")) return finish();

  // ---- knowledge distillation (teacher rewrites the real targets)
  train_stage("kd", "+ Knowledge Distillation", [&](const Corpus& cur) {
    auto teacher = model::load_model(st.model_path);
    Corpus real = load_corpus(st.real_tagged_path, Origin::REAL, Domain::NEWS);
    Corpus distilled = augment::distill(real, teacher, cfg.beam);
    Corpus next = cur;
    next.insert(next.end(), distilled.begin(), distilled.end());
    return next;
  });
  if (stop_after("kd")) return finish();

  // ---- forward-translation
  train_stage("ft", "+ Forward-Translation", [&](const Corpus& cur) {
    auto gen = model::load_model(st.model_path);
    auto mono = read_token_lines(mono_src, Lang::ZH);
    Corpus next = cur;
    for (auto& s : mono) {
      s = bpe::bpe_apply(s, st.bpe_src);
      // the generator was trained on tagged sources
      TokenSentence tagged = augment::tag_sentence(s, Origin::REAL, Domain::NEWS);
      TokenSentence out = gen.translate(tagged, {cfg.beam, 0.6, 64});
      if (out.tokens.empty()) continue;
      SentencePair p;
      p.src = augment::tag_sentence(s, Origin::FT, Domain::NEWS);
      p.tgt = out;
      p.origin = Origin::FT;
      p.domain = Domain::NEWS;
      next.push_back(std::move(p));
    }
    return next;
  });
  if (stop_after("ft")) return finish();

  // ---- iterative back-translation over fresh mono shards
  train_stage("multi_bt", "+ Multi BT", [&](const Corpus& cur) {
    auto mono = read_token_lines(mono_multi, Lang::EN);
    for (auto& s : mono) s = bpe::bpe_apply(text::mark_case(s), st.bpe_tgt);
    augment::MultiBtConfig mcfg;
    mcfg.rounds = cfg.multi_bt_rounds;
    mcfg.forward_cfg = cfg.arch;
    mcfg.reverse_cfg = cfg.arch;
    mcfg.train.hyper = cfg.hyper;
    mcfg.train.max_steps = cfg.multi_bt_steps;
    mcfg.train.seed = mix_seed(cfg.seed, 0x3B7);
    mcfg.sampling = cfg.bt_sampling;
    mcfg.include_forward = false;
    mcfg.domain = Domain::BIO;
    auto result = augment::iterate_bt(cur, {}, mono, cfg.multi_bt_rounds, mcfg);
    json rounds = json::array();
    for (const auto& man : result.manifests)
      rounds.push_back({{"round", man.round},
                        {"strategy", man.strategy},
                        {"shard", {man.shard_begin, man.shard_end}},
                        {"seed", man.seed},
                        {"generated", man.generated}});
    io::write_file(path("multi_bt/rounds.json"), rounds.dump(2));
    return result.corpus;
  });
  if (stop_after("multi_bt")) return finish();

  // ---- synthetic noise on pseudo data plus a slice of real data
  train_stage("noise", "+ Synthetic Noise", [&](const Corpus& cur) {
    Corpus next = cur;
    size_t real_budget =
        static_cast<size_t>(cfg.noise_real_fraction * static_cast<double>(cur.size()));
    size_t added = 0;
    for (size_t i = 0; i < cur.size(); ++i) {
      const auto& p = cur[i];
      bool pseudo = !p.src.tokens.empty() &&
                    (p.src.tokens[0] == "<BT>" || p.src.tokens[0] == "<FT>");
      bool real_slice = !pseudo && added < real_budget && (i % 10 == 0);
      if (!pseudo && !real_slice) continue;
      if (real_slice) ++added;
      augment::NoiseSpec spec = cfg.source_noise;
      spec.seed = mix_seed(cfg.seed ^ 0x4015E, i);
      TokenSentence bare = augment::strip_tags(p.src);
      TokenSentence noised = augment::apply_noise(bare, spec);
      SentencePair q;
      q.src = augment::tag_sentence(noised, Origin::NOISE, p.domain);
      q.tgt = p.tgt;
      q.origin = Origin::NOISE;
      q.domain = p.domain;
      next.push_back(std::move(q));
    }
    return next;
  });
  if (stop_after("noise")) return finish();

  // ---- fine-tuning on in-domain data
  auto finetune_stage = [&](const std::string& name, const std::string& label,
                            std::optional<augment::NoiseSpec> denoise) {
    if (!enabled(name)) return;
    fs::create_directories(st.dir / name);
    std::string ckpt = path(name + "/model.ckpt");
    std::string hyp = path(name + "/dev_hyp.txt");
    std::string row_path = path(name + "/row.json");
    uint64_t seed = mix_seed(cfg.seed, static_cast<uint64_t>(++stage_index));
    runner.stage(name, {st.model_path, tagged_ind, dev_src, dev_ref}, {ckpt, hyp, row_path},
                 seed, [&] {
                   auto base = model::load_model(st.model_path);
                   Corpus ind = load_corpus(tagged_ind, Origin::REAL, Domain::BIO);
                   if (denoise) {
                     auto d = *denoise;
                     d.seed = mix_seed(seed, 0xF1);
                     denoise = d;
                   }
                   auto tuned = finetune_model(cfg, base, ind, cfg.finetune_steps, seed, denoise);
                   model::save_model(ckpt, tuned);
                   double bleu = eval_dev({&tuned}, dev, st, cfg.beam, hyp);
                   io::write_file(row_path, json{{"label", label}, {"bleu", bleu}}.dump());
                 });
    json row = json::parse(io::read_file(row_path));
    add_row(row["label"], row["bleu"]);
    return;
  };

  std::string pre_finetune_model = st.model_path;
  finetune_stage("finetune", "+ Finetune", std::nullopt);
  std::string finetuned_model = path("finetune/model.ckpt");
  if (stop_after("finetune")) return finish();

  finetune_stage("finetune_denoise", "+ Target denoise finetune", cfg.denoise);
  if (stop_after("finetune_denoise")) return finish();

  // ---- candidate pool, Self-BLEU selection, ensemble decode
  if (enabled("ensemble")) {
    fs::create_directories(st.dir / "ensemble");
    std::string matrix_path = path("ensemble/matrix.json");
    std::string selected_path = path("ensemble/selected.json");
    std::string hyp = path("ensemble/dev_hyp.txt");
    std::string row_path = path("ensemble/row.json");
    std::vector<std::string> pool_ckpts;
    for (size_t i = 0; i < cfg.pool_size; ++i)
      pool_ckpts.push_back(path("ensemble/pool_" + std::to_string(i) + ".ckpt"));

    uint64_t seed = mix_seed(cfg.seed, 0xE5B);
    std::vector<std::string> outs = pool_ckpts;
    outs.insert(outs.end(), {matrix_path, selected_path, hyp, row_path});
    runner.stage("ensemble", {st.train_path, tagged_ind, dev_src, dev_ref}, outs, seed, [&] {
      Corpus train = load_corpus(st.train_path);
      Corpus ind = load_corpus(tagged_ind, Origin::REAL, Domain::BIO);
      const model::Arch archs[4] = {model::Arch::Big, model::Arch::Aan, model::Arch::SelfFirst,
                                    model::Arch::AanFirst};
      std::vector<model::TranslationModel> pool;
      std::vector<eval::CandidateModel> cands;
      for (size_t i = 0; i < cfg.pool_size; ++i) {
        model::ModelConfig arch = cfg.arch;
        arch.dec_plan = model::layer_plan(archs[i % 4], arch.dec_layers);
        uint64_t mseed = mix_seed(seed, i);
        auto m = train_on(cfg, train, arch, cfg.train_steps, mseed);
        bool denoised = (i / 4) % 2 == 1;
        std::optional<augment::NoiseSpec> dn;
        if (denoised) {
          dn = cfg.denoise;
          dn->seed = mix_seed(mseed, 0xF1);
        }
        m = finetune_model(cfg, m, ind, cfg.finetune_steps, mix_seed(mseed, 2), dn);
        model::save_model(pool_ckpts[i], m);

        eval::CandidateModel cand;
        cand.id = "pool_" + std::to_string(i);
        cand.checkpoint = pool_ckpts[i];
        std::string cand_hyp = path("ensemble/pool_" + std::to_string(i) + "_hyp.txt");
        cand.dev_bleu = eval_dev({&m}, dev, st, cfg.beam, cand_hyp);
        cand.dev_outputs = read_token_lines(cand_hyp, Lang::EN);
        cands.push_back(std::move(cand));
        pool.push_back(std::move(m));
      }
      auto matrix = eval::self_bleu_matrix(cands);
      io::write_file(matrix_path, matrix.to_json());
      std::vector<double> bleus;
      for (const auto& c : cands) bleus.push_back(c.dev_bleu);
      auto chosen = eval::select_ensemble(bleus, matrix, cfg.ensemble_k, cfg.ensemble_lambda);
      json sel = json::array();
      for (size_t i : chosen) sel.push_back(cands[i].id);
      io::write_file(selected_path, sel.dump(2));

      std::vector<const model::TranslationModel*> members;
      for (size_t i : chosen) members.push_back(&pool[i]);
      double bleu = eval_dev(members, dev, st, cfg.beam, hyp);
      io::write_file(row_path, json{{"label", "+ Ensemble"}, {"bleu", bleu}}.dump());
    });
    json row = json::parse(io::read_file(row_path));
    add_row(row["label"], row["bleu"], /*starred=*/true);
  }

  (void)pre_finetune_model;
  (void)finetuned_model;
  return finish();
}

}  // namespace mtforge::pipeline
