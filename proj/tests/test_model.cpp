#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mtforge/decode.hpp"
#include "mtforge/error.hpp"
#include "mtforge/toy_task.hpp"
#include "mtforge/train.hpp"

using namespace mtforge;
using namespace mtforge::model;

namespace {

ModelConfig tiny_config(Arch arch, int dec_layers = 2) {
  ModelConfig cfg;
  cfg.enc_layers = 1;
  cfg.dec_layers = dec_layers;
  cfg.hidden = 12;
  cfg.ffn = 16;
  cfg.heads = 2;
  cfg.src_vocab = 11;
  cfg.tgt_vocab = 13;
  cfg.max_len = 32;
  cfg.dec_plan = layer_plan(arch, dec_layers);
  return cfg;
}

}  // namespace

TEST_CASE("layer_plan per architecture") {
  CHECK(layer_plan(Arch::SelfFirst, 6) ==
        std::vector<LayerKind>{LayerKind::Self, LayerKind::Aan, LayerKind::Self, LayerKind::Aan,
                               LayerKind::Self, LayerKind::Aan});
  CHECK(layer_plan(Arch::AanFirst, 6) ==
        std::vector<LayerKind>{LayerKind::Aan, LayerKind::Self, LayerKind::Aan, LayerKind::Self,
                               LayerKind::Aan, LayerKind::Self});
  CHECK(layer_plan(Arch::Big, 1) == std::vector<LayerKind>{LayerKind::Self});
  CHECK(layer_plan(Arch::Aan, 3) ==
        std::vector<LayerKind>{LayerKind::Aan, LayerKind::Aan, LayerKind::Aan});
}

TEST_CASE("cumulative average: definition and dense-matrix oracle") {
  Mat v(3, 2);
  v << 1, 2, 3, 4, 5, 6;
  Mat avg = cumulative_average(v);
  CHECK(avg(0, 0) == doctest::Approx(1.0));
  CHECK(avg(1, 0) == doctest::Approx(2.0));
  CHECK(avg(2, 0) == doctest::Approx(3.0));
  CHECK(avg(2, 1) == doctest::Approx(4.0));

  // all-equal rows stay constant
  Mat same = Mat::Ones(5, 3) * 2.5;
  Mat avg_same = cumulative_average(same);
  CHECK((avg_same - same).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // lower-triangular M with M[j][k] = 1/(j+1)
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 1 + static_cast<int>(rng.bounded(8));
    int h = 1 + static_cast<int>(rng.bounded(6));
    Mat y(n, h);
    for (int i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
    Mat m = Mat::Zero(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k <= j; ++k) m(j, k) = 1.0 / (j + 1);
    CHECK((cumulative_average(y) - m * y).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("forward rows are normalized log-distributions") {
  for (Arch arch : {Arch::Big, Arch::Aan, Arch::SelfFirst, Arch::AanFirst}) {
    Params p = Params::init(tiny_config(arch), 5);
    Trace tr;
    Mat lp = forward(p, {4, 5, 6}, {1, 7, 8, 9}, tr);
    for (Eigen::Index r = 0; r < lp.rows(); ++r) {
      double sum = lp.row(r).array().exp().sum();
      CHECK(std::fabs(sum - 1.0) < 1e-5);
    }
  }
}

TEST_CASE("forward is causal: extending the prefix preserves earlier rows") {
  for (Arch arch : {Arch::Big, Arch::Aan, Arch::SelfFirst, Arch::AanFirst}) {
    Params p = Params::init(tiny_config(arch), 6);
    std::vector<int> src = {4, 5, 6, 7};
    std::vector<int> din = {1, 5, 6, 7, 8};
    Trace tr1, tr2;
    Mat short_out = forward(p, src, din, tr1);
    std::vector<int> longer = din;
    longer.push_back(9);
    Mat long_out = forward(p, src, longer, tr2);
    CHECK((long_out.topRows(short_out.rows()) - short_out).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("perturbing decoder position j only changes outputs at >= j") {
  for (Arch arch : {Arch::Big, Arch::AanFirst}) {
    Params p = Params::init(tiny_config(arch), 8);
    std::vector<int> src = {4, 5};
    std::vector<int> din = {1, 6, 7, 8, 9};
    Trace tr;
    Mat base = forward(p, src, din, tr);
    for (size_t j = 1; j < din.size(); ++j) {
      auto changed = din;
      changed[j] = (changed[j] + 1) % 13;
      if (changed[j] == din[j]) continue;
      Trace tr2;
      Mat out = forward(p, src, changed, tr2);
      CHECK((out.topRows(j) - base.topRows(j)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((out.row(j) - base.row(j)).cwiseAbs().maxCoeff() > 0.0);
    }
  }
}

TEST_CASE("forward rejects out-of-range ids") {
  Params p = Params::init(tiny_config(Arch::Big), 5);
  Trace tr;
  CHECK_THROWS_AS((void)forward(p, {4, 99}, {1, 5}, tr), Error);
  CHECK_THROWS_AS((void)forward(p, {4}, {1, 55}, tr), Error);
}

TEST_CASE("forward is deterministic across calls") {
  Params p = Params::init(tiny_config(Arch::SelfFirst), 5);
  Trace tr1, tr2;
  Mat a = forward(p, {4, 5, 6}, {1, 7, 8}, tr1);
  Mat b = forward(p, {4, 5, 6}, {1, 7, 8}, tr2);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient check passes for all four decoder plans") {
  for (Arch arch : {Arch::Big, Arch::Aan, Arch::SelfFirst, Arch::AanFirst}) {
    auto result = grad_check(tiny_config(arch), 99, 200, 1e-4);
    INFO("plan ", to_string(arch), " max_rel_err ", result.max_rel_err);
    CHECK(result.max_rel_err < 1e-3);
    CHECK(result.checked == 200);
  }
}

TEST_CASE("unused embedding rows receive no gradient and no update") {
  ModelConfig cfg = tiny_config(Arch::Big);
  Params p = Params::init(cfg, 21);

  std::vector<IdPair> data = {{{4, 5}, {6, 7}}, {{5, 6}, {7, 8}}};
  Params before = p;
  TrainOptions opt;
  opt.max_steps = 3;
  opt.seed = 2;
  opt.hyper.batch_tokens = 16;
  train_loop(p, data, opt);

  // src ids 7..10 never appear: their embedding rows must be untouched
  for (int row = 7; row < cfg.src_vocab; ++row)
    CHECK((p.src_emb.row(row) - before.src_emb.row(row)).cwiseAbs().maxCoeff() == 0.0);
  // used rows moved
  CHECK((p.src_emb.row(4) - before.src_emb.row(4)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("learning-rate schedule peaks at the warmup step") {
  TrainHyper h;
  h.warmup_steps = 4000;
  h.lr_peak = 5e-4;
  CHECK(lr_at(h, 4000) == doctest::Approx(5e-4));
  CHECK(lr_at(h, 2000) == doctest::Approx(2.5e-4));
  CHECK(lr_at(h, 16000) == doctest::Approx(2.5e-4));
  CHECK(lr_at(h, 1) < lr_at(h, 2));
}

TEST_CASE("train_loop reports non-finite loss") {
  ModelConfig cfg = tiny_config(Arch::Big);
  Params p = Params::init(cfg, 3);
  p.w_out.setConstant(1e308);  // poisoned parameters
  std::vector<IdPair> data = {{{4, 5}, {6, 7}}};
  TrainOptions opt;
  opt.max_steps = 1;
  CHECK_THROWS_AS((void)train_loop(p, data, opt), Error);
}

TEST_CASE("toy copy task trains to low loss") {
  ModelConfig cfg;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.hidden = 32;
  cfg.ffn = 64;
  cfg.heads = 4;
  cfg.src_vocab = 12;
  cfg.tgt_vocab = 12;
  cfg.max_len = 16;
  cfg.dec_plan = {LayerKind::Self};

  for (uint64_t seed : {1ull, 2ull}) {
    Rng rng(seed);
    std::vector<IdPair> data;
    for (int i = 0; i < 50; ++i) {
      IdPair ex;
      size_t n = 2 + rng.bounded(5);
      for (size_t k = 0; k < n; ++k) {
        int id = 4 + static_cast<int>(rng.bounded(8));
        ex.src.push_back(id);
        ex.tgt.push_back(id);
      }
      data.push_back(ex);
    }
    Params p = Params::init(cfg, seed);
    TrainOptions opt;
    opt.max_steps = 800;
    opt.seed = seed;
    opt.hyper.batch_tokens = 128;
    opt.hyper.warmup_steps = 100;
    opt.hyper.lr_peak = 3e-3;
    auto stats = train_loop(p, data, opt);
    double best = 1e9;
    for (double l : stats.step_losses) best = std::min(best, l);
    INFO("seed ", seed, " best loss ", best);
    CHECK(best < 1.0);
  }
}

TEST_CASE("checkpoint save/load round trip") {
  ModelConfig cfg = tiny_config(Arch::SelfFirst);
  TranslationModel m;
  m.cfg = cfg;
  m.params = Params::init(cfg, 77);
  m.src_vocab = Vocab::build({{{"今", "天"}, Lang::ZH}}, {"<BT>"});
  m.tgt_vocab = Vocab::build({{{"to", "day"}, Lang::EN}}, {"<BT>"});
  m.cfg.src_vocab = m.params.cfg.src_vocab;

  auto dir = std::filesystem::temp_directory_path();
  auto path = (dir / "mtf_ckpt_test.bin").string();
  save_model(path, m);
  TranslationModel loaded = load_model(path);

  CHECK(loaded.cfg.hidden == cfg.hidden);
  CHECK(loaded.cfg.dec_plan == cfg.dec_plan);
  CHECK(loaded.src_vocab == m.src_vocab);
  CHECK(loaded.tgt_vocab == m.tgt_vocab);

  // float32 quantization is applied exactly once: saving the loaded model
  // again must be byte-identical
  auto path2 = (dir / "mtf_ckpt_test2.bin").string();
  save_model(path2, loaded);
  TranslationModel loaded2 = load_model(path2);
  auto t1 = loaded.params.tensors();
  auto t2 = loaded2.params.tensors();
  for (size_t i = 0; i < t1.size(); ++i)
    for (Eigen::Index k = 0; k < t1[i].size(); ++k) CHECK(t1[i].data[k] == t2[i].data[k]);

  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}
