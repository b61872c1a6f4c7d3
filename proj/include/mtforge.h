/* mtforge C API: neural MT pipeline toolkit.
 *
 * Conventions:
 *   - Every function returns an mtf_code; MTF_OK is success.
 *   - On failure, mtf_last_error() returns a thread-local message valid
 *     until the next call on the same thread.
 *   - Strings returned through char** out-parameters are heap-allocated;
 *     release them with mtf_string_free().
 *   - Opaque handles are created/destroyed with their _open/_free pairs.
 *   - Text I/O is UTF-8; token sentences are single lines of
 *     space-separated tokens; corpora are TSV lines "src<TAB>tgt".
 */
#ifndef MTFORGE_H
#define MTFORGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mtf_code {
  MTF_OK = 0,
  MTF_ERR_INVALID_ARG = 1,
  MTF_ERR_IO = 2,
  MTF_ERR_PARSE = 3,
  MTF_ERR_EMPTY_CORPUS = 4,
  MTF_ERR_MARKER = 5,        /* reserved case marker misuse */
  MTF_ERR_CONTINUATION = 6,  /* dangling @@ piece */
  MTF_ERR_TAG = 7,           /* sentence already tagged */
  MTF_ERR_MONO = 8,          /* monolingual shards exhausted */
  MTF_ERR_VOCAB = 9,         /* id out of range or vocab mismatch */
  MTF_ERR_NONFINITE = 10,    /* training loss diverged */
  MTF_ERR_STATE = 11,        /* decode state mismatch */
  MTF_ERR_LENGTH = 12,       /* hyp/ref length mismatch */
  MTF_ERR_STAGE = 13,        /* pipeline stage failure */
  MTF_ERR_DIGEST = 14,       /* manifest digest mismatch on resume */
  MTF_ERR_LOCK = 15,         /* pipeline directory locked */
  MTF_ERR_INTERNAL = 16
} mtf_code;

const char* mtf_version(void);
const char* mtf_last_error(void);
void mtf_string_free(char* s);

/* ---------------------------------------------------------- text_norm */

typedef struct mtf_textnorm mtf_textnorm;

/* lang: "zh" or "en". lexicon_path may be NULL (empty lexicon). */
mtf_code mtf_textnorm_open(const char* lang, const char* lexicon_path, mtf_textnorm** out);
void mtf_textnorm_free(mtf_textnorm* h);

/* op: "normalize" | "tokenize" | "mark-case" | "unmark-case" | "detok".
 * "tokenize" dispatches on the handle's language (EN splitter or the
 * lexicon-greedy ZH segmenter). */
mtf_code mtf_textnorm_line(mtf_textnorm* h, const char* op, const char* line, char** out_line);

/* ------------------------------------------------------------- filter */

/* Applies the rule set (JSON, may be NULL for defaults) and optionally an
 * alignment filter (model1_path may be NULL). drop_frac < 0 keeps the
 * value from the rules JSON. Writes the kept corpus and a JSON report. */
mtf_code mtf_filter_run(const char* in_tsv, const char* out_tsv, const char* rules_json,
                        const char* model1_path, double drop_frac, const char* report_json_path);

mtf_code mtf_model1_train(const char* corpus_tsv, int iterations, const char* out_path);

/* One line per 1-1 bead: "src_index<TAB>tgt_index". */
mtf_code mtf_sentence_align(const char* src_doc_path, const char* tgt_doc_path,
                            const char* out_tsv);

/* ---------------------------------------------------------------- bpe */

typedef struct mtf_bpe mtf_bpe;

mtf_code mtf_bpe_learn(const char* corpus_path, size_t n_ops, const char* protected_path,
                       const char* model_out_path);
mtf_code mtf_bpe_open(const char* model_path, const char* protected_path, mtf_bpe** out);
void mtf_bpe_free(mtf_bpe* h);
mtf_code mtf_bpe_apply_line(mtf_bpe* h, const char* line, char** out_line);
mtf_code mtf_bpe_undo_line(const char* line, char** out_line);

/* ------------------------------------------------------------ augment */

/* spec_json: {"unk_rate","delete_rate","swap_rate","swap_window","seed"}.
 * Noises the source side; per-line seeds derive from (seed, line index). */
mtf_code mtf_augment_noise(const char* in_tsv, const char* out_tsv, const char* spec_json,
                           uint64_t seed);

/* origin: REAL|BT|FT|NOISE; domain: BIO|NEWS|INHOUSE. */
mtf_code mtf_augment_tag(const char* in_tsv, const char* out_tsv, const char* origin,
                         const char* domain);

/* sampling_json: {"mode":"BEAM"|"TOPP","beam_size","p_low","p_high",
 * "seed","max_len"}. */
mtf_code mtf_augment_bt(const char* mono_path, const char* reverse_ckpt,
                        const char* sampling_json, const char* domain, const char* out_tsv);
mtf_code mtf_augment_ft(const char* mono_path, const char* const* ckpts, size_t n_ckpts,
                        int beam, const char* domain, const char* out_tsv);
mtf_code mtf_augment_kd(const char* corpus_tsv, const char* teacher_ckpt, int beam,
                        const char* out_tsv);

/* config_json holds rounds, model/train settings and sampling spec; see
 * docs. Writes the merged corpus and a per-round manifest JSON. */
mtf_code mtf_augment_multi_bt(const char* bitext_tsv, const char* mono_src_path,
                              const char* mono_tgt_path, const char* config_json,
                              const char* out_tsv, const char* manifest_json_path);

/* -------------------------------------------------------------- model */

typedef struct mtf_model mtf_model;

/* config_json: {"model":{...},"hyper":{...},"train_steps":N,"seed":N}.
 * Trains on corpus_tsv from scratch and writes a checkpoint. */
mtf_code mtf_model_train(const char* config_json_path, const char* corpus_tsv,
                         const char* ckpt_out);

/* Continues training an existing checkpoint on in-domain data; denoise may
 * be NULL (plain fine-tuning) or a NoiseSpec JSON for target denoising. */
mtf_code mtf_model_finetune(const char* config_json_path, const char* corpus_tsv,
                            const char* ckpt_in, const char* denoise_json, const char* ckpt_out);

mtf_code mtf_model_open(const char* ckpt_path, mtf_model** out);
void mtf_model_free(mtf_model* h);
mtf_code mtf_model_translate_line(mtf_model* h, const char* line, int beam, char** out_line);

/* Finite-difference check: plan is BIG|DEEP|AAN|SELF_FIRST|AAN_FIRST. */
mtf_code mtf_model_gradcheck(const char* plan, uint64_t seed, int samples, double eps,
                             double* max_rel_err);

/* --------------------------------------------------------------- eval */

/* Detail JSON carries score, n-gram precisions, brevity penalty, lengths.
 * detail_json may be NULL. */
mtf_code mtf_eval_bleu(const char* hyp_path, const char* ref_path, double* score,
                       char** detail_json);

/* outputs_dir: every "*.txt" file is one candidate (id = basename). */
mtf_code mtf_eval_self_bleu(const char* outputs_dir, const char* matrix_json_out);

/* dev_bleu_tsv: "id<TAB>bleu" per line; ids must match the matrix.
 * Selected ids are returned as a JSON array. */
mtf_code mtf_eval_select(const char* matrix_json_path, const char* dev_bleu_tsv, size_t k,
                         double lambda, char** selected_json);

/* ----------------------------------------------------------- pipeline */

/* Runs the configured stages; writes report.txt/report.json and
 * manifest.json under the work dir. until may be NULL or a stage name.
 * chain_digest (optional out) receives the end-to-end output digest. */
mtf_code mtf_pipeline_run(const char* config_json_path, int resume, const char* until,
                          char** chain_digest);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MTFORGE_H */
