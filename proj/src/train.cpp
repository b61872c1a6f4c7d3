#include "mtforge/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "mtforge/error.hpp"

namespace mtforge::model {

std::vector<IdPair> encode_corpus(const Corpus& corpus, const Vocab& src_vocab,
                                  const Vocab& tgt_vocab) {
  std::vector<IdPair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus) out.push_back({src_vocab.encode(p.src), tgt_vocab.encode(p.tgt)});
  return out;
}

namespace {

struct Adam {
  std::vector<Vec> m, v;
  long t = 0;

  void ensure(Params& params) {
    if (!m.empty()) return;
    for (auto& tr : params.tensors()) {
      m.push_back(Vec::Zero(tr.size()));
      v.push_back(Vec::Zero(tr.size()));
    }
  }

  void step(Params& params, Params& grads, const TrainHyper& h, double lr) {
    ensure(params);
    ++t;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
    auto ps = params.tensors();
    auto gs = grads.tensors();
    for (size_t i = 0; i < ps.size(); ++i) {
      Eigen::Map<Eigen::ArrayXd> p(ps[i].data, ps[i].size());
      Eigen::Map<Eigen::ArrayXd> g(gs[i].data, gs[i].size());
      m[i].array() = h.beta1 * m[i].array() + (1.0 - h.beta1) * g;
      v[i].array() = h.beta2 * v[i].array() + (1.0 - h.beta2) * g.square();
      p -= lr * (m[i].array() / bc1) / ((v[i].array() / bc2).sqrt() + h.adam_eps);
    }
  }
};

// Teacher-forced view of one pair: decoder input [BOS, y...], targets
// [y..., EOS]. Target denoising corrupts only the decoder input tokens
// after BOS.
void make_io(const IdPair& ex, const std::optional<augment::NoiseSpec>& denoise, Rng& noise_rng,
             std::vector<int>& din, std::vector<int>& targets) {
  std::vector<int> body = ex.tgt;
  if (denoise) {
    std::vector<bool> prot(body.size(), false);
    auto plan = augment::noise_plan(body.size(), prot, *denoise, noise_rng);
    std::vector<int> noised;
    noised.reserve(plan.size());
    for (int slot : plan)
      noised.push_back(slot == augment::kUnkSlot ? Vocab::kUnk : body[static_cast<size_t>(slot)]);
    // keep teacher-forcing shape: pad up to the clean length
    noised.resize(body.size(), Vocab::kPad);
    body = std::move(noised);
  }
  din.clear();
  din.push_back(Vocab::kBos);
  din.insert(din.end(), body.begin(), body.end());
  targets = ex.tgt;
  targets.push_back(Vocab::kEos);
}

}  // namespace

TrainStats train_loop(Params& params, const std::vector<IdPair>& data, const TrainOptions& opt) {
  if (data.empty()) raise(Errc::empty_corpus, "train_loop: no data");
  const TrainHyper& h = opt.hyper;

  Rng shuffle_rng(mix_seed(opt.seed, 0x51ULL));
  Rng noise_rng(mix_seed(opt.seed, 0xD301ULL));

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();  // forces an initial shuffle

  auto next_index = [&]() {
    if (cursor >= order.size()) {
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.bounded(i)]);
      cursor = 0;
    }
    return order[cursor++];
  };

  Adam adam;
  Params grads = Params::zeros_like(params);
  TrainStats stats;

  for (long step = 1; step <= opt.max_steps; ++step) {
    grads.set_zero();
    double step_loss = 0.0;
    long step_tokens = 0;

    struct Pending {
      Trace tr;
      Mat dlogits;
    };
    std::vector<Pending> pending;

    for (int micro = 0; micro < h.update_freq; ++micro) {
      long tokens = 0;
      size_t micro_sentences = 0;
      while (tokens < h.batch_tokens && micro_sentences < data.size()) {
        const IdPair& ex = data[next_index()];
        if (ex.src.empty() || ex.tgt.empty()) continue;
        Pending w;
        std::vector<int> din, targets;
        make_io(ex, opt.target_denoise, noise_rng, din, targets);
        Mat logprobs = forward(params, ex.src, din, w.tr);
        step_loss += loss_and_grad(logprobs, targets, h.label_smoothing, w.dlogits);
        tokens += static_cast<long>(targets.size());
        ++micro_sentences;
        pending.push_back(std::move(w));
      }
      step_tokens += tokens;
    }

    if (!std::isfinite(step_loss))
      raise(Errc::non_finite_loss, "loss diverged at step " + std::to_string(step));

    const double scale = 1.0 / static_cast<double>(std::max(step_tokens, 1L));
    for (auto& w : pending) backward(params, w.tr, w.dlogits, scale, grads);

    double lr = opt.lr_scale * lr_at(h, step);
    adam.step(params, grads, h, lr);
    if (!params.all_finite())
      raise(Errc::non_finite_loss, "parameters non-finite after step " + std::to_string(step));

    stats.step_losses.push_back(step_loss * scale);
    stats.steps = step;
    if (opt.log_every > 0 && step % opt.log_every == 0)
      std::cerr << "step " << step << " loss " << step_loss * scale << " lr " << lr << "\n";
  }
  return stats;
}

TrainStats finetune(Params& params, const std::vector<IdPair>& in_domain, TrainOptions opt) {
  return train_loop(params, in_domain, opt);
}

GradCheckResult grad_check(const ModelConfig& cfg, uint64_t seed, int n_samples, double eps) {
  Params params = Params::init(cfg, seed);
  Rng rng(mix_seed(seed, 17));

  // small random batch over the configured vocabularies
  std::vector<IdPair> batch;
  for (int i = 0; i < 3; ++i) {
    IdPair ex;
    int ns = 2 + static_cast<int>(rng.bounded(3));
    int nt = 2 + static_cast<int>(rng.bounded(3));
    for (int k = 0; k < ns; ++k)
      ex.src.push_back(4 + static_cast<int>(rng.bounded(static_cast<uint64_t>(cfg.src_vocab - 4))));
    for (int k = 0; k < nt; ++k)
      ex.tgt.push_back(4 + static_cast<int>(rng.bounded(static_cast<uint64_t>(cfg.tgt_vocab - 4))));
    batch.push_back(std::move(ex));
  }

  auto batch_loss = [&](Params& p) {
    double total = 0.0;
    for (const auto& ex : batch) {
      std::vector<int> din{Vocab::kBos};
      din.insert(din.end(), ex.tgt.begin(), ex.tgt.end());
      std::vector<int> targets = ex.tgt;
      targets.push_back(Vocab::kEos);
      Trace tr;
      Mat logprobs = forward(p, ex.src, din, tr);
      Mat dl;
      total += loss_and_grad(logprobs, targets, 0.1, dl);
    }
    return total;
  };

  // analytic gradients
  Params grads = Params::zeros_like(params);
  for (const auto& ex : batch) {
    std::vector<int> din{Vocab::kBos};
    din.insert(din.end(), ex.tgt.begin(), ex.tgt.end());
    std::vector<int> targets = ex.tgt;
    targets.push_back(Vocab::kEos);
    Trace tr;
    Mat logprobs = forward(params, ex.src, din, tr);
    Mat dl;
    loss_and_grad(logprobs, targets, 0.1, dl);
    backward(params, tr, dl, 1.0, grads);
  }

  auto ptensors = params.tensors();
  auto gtensors = grads.tensors();
  long total_scalars = params.scalar_count();

  GradCheckResult result;
  for (int s = 0; s < n_samples; ++s) {
    long flat = static_cast<long>(rng.bounded(static_cast<uint64_t>(total_scalars)));
    size_t ti = 0;
    while (flat >= ptensors[ti].size()) flat -= ptensors[ti++].size();
    double* slot = ptensors[ti].data + flat;
    double analytic = gtensors[ti].data[flat];

    double saved = *slot;
    *slot = saved + eps;
    double up = batch_loss(params);
    *slot = saved - eps;
    double down = batch_loss(params);
    *slot = saved;

    double fd = (up - down) / (2.0 * eps);
    double denom = std::max({std::fabs(fd), std::fabs(analytic), 1e-6});
    result.max_rel_err = std::max(result.max_rel_err, std::fabs(fd - analytic) / denom);
    ++result.checked;
  }
  return result;
}

}  // namespace mtforge::model
