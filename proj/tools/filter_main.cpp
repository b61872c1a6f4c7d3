#include <CLI11.hpp>

#include "cli_util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bilingual corpus filtering and sentence alignment"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Apply the filtering rules to a corpus");
  std::string in = "-", out = "-", rules, align_model, report;
  double drop_frac = -1.0;
  run->add_option("--in", in, "Input TSV (src TAB tgt), '-' for stdin");
  run->add_option("--out", out, "Output TSV, '-' for stdout");
  run->add_option("--rules", rules, "Rule set JSON");
  run->add_option("--align-model", align_model, "Trained alignment table");
  run->add_option("--drop-frac", drop_frac, "Alignment drop fraction (overrides rules)");
  run->add_option("--report", report, "Write the per-rule report JSON here");

  auto* train = app.add_subcommand("train-align", "Train the alignment scorer");
  std::string t_in, t_model;
  int iters = 10;
  train->add_option("--in", t_in, "Training corpus TSV")->required();
  train->add_option("--iters", iters, "EM iterations");
  train->add_option("--model", t_model, "Output table path")->required();

  auto* align = app.add_subcommand("sent-align", "Length-based 1-1 sentence alignment");
  std::string a_src, a_tgt, a_out;
  align->add_option("--src", a_src, "Source document, one sentence per line")->required();
  align->add_option("--tgt", a_tgt, "Target document")->required();
  align->add_option("--out", a_out, "Output bead index TSV")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    std::string in_path = in == "-" ? cli::materialize_stdin() : in;
    std::string out_path = out == "-" ? in_path + ".out" : out;
    cli::check(mtf_filter_run(in_path.c_str(), out_path.c_str(),
                              rules.empty() ? nullptr : rules.c_str(),
                              align_model.empty() ? nullptr : align_model.c_str(), drop_frac,
                              report.empty() ? nullptr : report.c_str()));
    if (out == "-") {
      std::ifstream result(out_path, std::ios::binary);
      std::cout << result.rdbuf();
      std::remove(out_path.c_str());
    }
    if (in == "-") std::remove(in_path.c_str());
  } else if (train->parsed()) {
    cli::check(mtf_model1_train(t_in.c_str(), iters, t_model.c_str()));
  } else {
    cli::check(mtf_sentence_align(a_src.c_str(), a_tgt.c_str(), a_out.c_str()));
  }
  return 0;
}
