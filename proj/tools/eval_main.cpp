#include <cstdio>

#include <CLI11.hpp>

#include "cli_util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"BLEU scoring, Self-BLEU matrices, ensemble selection"};
  app.require_subcommand(1);

  auto* bleu = app.add_subcommand("bleu", "Corpus BLEU-4");
  std::string hyp, ref;
  bool as_json = false;
  bleu->add_option("--hyp", hyp)->required();
  bleu->add_option("--ref", ref)->required();
  bleu->add_flag("--json", as_json, "Print the full detail JSON");

  auto* sb = app.add_subcommand("self-bleu", "Pairwise similarity matrix");
  std::string outputs_dir, matrix_out;
  sb->add_option("--outputs", outputs_dir, "Directory of candidate output .txt files")
      ->required();
  sb->add_option("--matrix", matrix_out, "Matrix JSON output")->required();

  auto* sel = app.add_subcommand("select", "Greedy performance/diversity selection");
  std::string matrix_in, dev_bleu;
  size_t k = 6;
  double lambda = 0.1;
  sel->add_option("--matrix", matrix_in)->required();
  sel->add_option("--dev-bleu", dev_bleu, "TSV: id TAB dev BLEU")->required();
  sel->add_option("--k", k);
  sel->add_option("--lambda", lambda);

  CLI11_PARSE(app, argc, argv);

  if (bleu->parsed()) {
    double score = 0.0;
    char* detail = nullptr;
    cli::check(mtf_eval_bleu(hyp.c_str(), ref.c_str(), &score, as_json ? &detail : nullptr));
    if (as_json)
      std::printf("%s\n", cli::owned(detail).c_str());
    else
      std::printf("BLEU = %.2f\n", score);
  } else if (sb->parsed()) {
    cli::check(mtf_eval_self_bleu(outputs_dir.c_str(), matrix_out.c_str()));
  } else {
    char* selected = nullptr;
    cli::check(mtf_eval_select(matrix_in.c_str(), dev_bleu.c_str(), k, lambda, &selected));
    std::printf("%s\n", cli::owned(selected).c_str());
  }
  return 0;
}
