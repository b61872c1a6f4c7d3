#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mtforge/rng.hpp"

namespace mtforge::model {

using Mat = Eigen::MatrixXd;  // rows = positions, cols = features
using Vec = Eigen::VectorXd;

enum class LayerKind { Self, Aan };
enum class Arch { Big, Deep, Aan, SelfFirst, AanFirst };

Arch arch_from_string(const std::string& s);
const char* to_string(Arch a);
const char* to_string(LayerKind k);

// Decoder layer plan per architecture: Big/Deep stacks are pure
// self-attention, Aan is pure average attention, the mixed plans alternate
// starting with the named kind.
std::vector<LayerKind> layer_plan(Arch arch, int dec_layers);

struct ModelConfig {
  int enc_layers = 2;
  int dec_layers = 2;
  int hidden = 64;
  int ffn = 128;
  int heads = 4;
  std::vector<LayerKind> dec_plan;  // size dec_layers
  int src_vocab = 0;
  int tgt_vocab = 0;
  int max_len = 128;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& json_text);
};

struct TrainHyper {
  double beta1 = 0.9;
  double beta2 = 0.998;
  double adam_eps = 1e-8;
  int batch_tokens = 1024;
  int update_freq = 1;
  int warmup_steps = 4000;
  double lr_peak = 5e-4;
  double label_smoothing = 0.1;

  std::string to_json() const;
  static TrainHyper from_json(const std::string& json_text);
};

// Inverse-sqrt schedule with linear warmup; peaks at lr_peak when
// step == warmup_steps.
double lr_at(const TrainHyper& h, long step);

// ------------------------------------------------------------ parameters

struct LnParams {
  Vec gamma, beta;
};
struct AttnParams {
  Mat wq, wk, wv, wo;  // hidden x hidden
  Vec bq, bk, bv, bo;
};
struct FfnParams {
  Mat w1;  // hidden x ffn
  Vec b1;
  Mat w2;  // ffn x hidden
  Vec b2;
};
// Average-attention block:
//   avg_j   = (1/j) * sum_{k<=j} y_k
//   g~_j    = FFN(avg_j)
//   [i; f]  = sigmoid([y_j ; g~_j] Wg + bg)
//   out_j   = LN(y_j + i * y_j + f * g~_j)
struct AanParams {
  FfnParams ffn;
  Mat wg;  // 2*hidden x 2*hidden
  Vec bg;
  LnParams ln_out;
};
struct EncLayer {
  LnParams ln1;
  AttnParams attn;
  LnParams ln2;
  FfnParams ffn;
};
struct DecLayer {
  LayerKind kind = LayerKind::Self;
  LnParams ln1;          // Self only
  AttnParams self_attn;  // Self only
  AanParams aan;         // Aan only
  LnParams ln2;
  AttnParams cross;
  LnParams ln3;
  FfnParams ffn;
};

struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index rows, cols;
  Eigen::Index size() const { return rows * cols; }
};

struct Params {
  ModelConfig cfg;
  Mat src_emb, tgt_emb;  // vocab x hidden
  std::vector<EncLayer> enc;
  std::vector<DecLayer> dec;
  LnParams enc_ln, dec_ln;  // final norms
  Mat w_out;                // hidden x tgt_vocab
  Vec b_out;

  static Params init(const ModelConfig& cfg, uint64_t seed);
  static Params alloc(const ModelConfig& cfg);  // zero-filled
  static Params zeros_like(const Params& p);

  // Stable enumeration of every tensor; grads built with zeros_like yield
  // an aligned registry. Column-major storage order, as serialized.
  std::vector<TensorRef> tensors();

  void set_zero();
  bool all_finite();
  long scalar_count();
};

// ----------------------------------------------------------- forward

struct LnTrace {
  Mat xhat;
  Vec inv_std;
};
struct AttnTrace {
  Mat x_q, x_kv;
  Mat q, k, v;
  std::vector<Mat> att;  // per head, rows softmax-normalized
  Mat heads_out;         // concatenated per-head outputs, pre-Wo
};
struct FfnTrace {
  Mat x, a1;
};
struct AanTrace {
  Mat y, avg;
  FfnTrace ffn;
  Mat gtilde, i_gate, f_gate, u;
  LnTrace ln_out;
};
struct EncLayerTrace {
  LnTrace ln1;
  AttnTrace attn;
  Mat x1;
  LnTrace ln2;
  FfnTrace ffn;
};
struct DecLayerTrace {
  LnTrace ln1;
  AttnTrace self_attn;
  AanTrace aan;
  Mat y1;
  LnTrace ln2;
  AttnTrace cross;
  Mat y2;
  LnTrace ln3;
  FfnTrace ffn;
};
struct Trace {
  std::vector<int> src_ids, din_ids;
  Mat enc_x0;
  std::vector<EncLayerTrace> enc_layers;
  LnTrace enc_ln;
  Mat enc_out;
  Mat dec_x0;
  std::vector<DecLayerTrace> dec_layers;
  LnTrace dec_ln;
  Mat dec_out;
  Mat logits;
};

Mat positional_encoding(int n, int hidden, int offset = 0);

// Cumulative mean over rows: row j of the result is the mean of rows
// 0..j (inclusive). Equals multiplication by the lower-triangular matrix
// M with M[j][k] = 1/(j+1) for k <= j. This is the summarization stage of
// the average-attention block.
Mat cumulative_average(const Mat& y);

// The full average-attention block (cumulative mean, FFN, gated combine,
// layer norm), exposed for oracle tests.
Mat avg_attention(const AanParams& p, const Mat& y, AanTrace& tr);

Mat encode_source(const Params& p, const std::vector<int>& src_ids, Trace& tr);

// Teacher-forced forward: returns per-position log-probabilities
// (|din_ids| x tgt_vocab, rows logsumexp to 0). Output at position j
// depends only on src and decoder inputs at positions <= j.
// Throws vocab_out_of_range for ids outside the configured vocabularies.
Mat forward(const Params& p, const std::vector<int>& src_ids, const std::vector<int>& din_ids,
            Trace& tr);

// Label-smoothed cross-entropy, summed over positions. q(gold) = 1 - eps,
// remaining eps spread uniformly over the whole vocabulary. dlogits gets
// the unscaled gradient (softmax - q).
double loss_and_grad(const Mat& logprobs, const std::vector<int>& targets, double label_smoothing,
                     Mat& dlogits);

// Accumulates parameter gradients for one sentence; `scale` multiplies the
// contribution (use 1 / total_tokens for token-normalized batch loss).
void backward(const Params& p, const Trace& tr, const Mat& dlogits, double scale, Params& grads);

}  // namespace mtforge::model
