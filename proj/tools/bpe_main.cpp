#include <CLI11.hpp>

#include "cli_util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Byte-pair encoding: learn, apply, undo"};
  app.require_subcommand(1);

  std::string model, protected_file;
  app.add_option("--model", model, "Merge table file");
  app.add_option("--protected", protected_file, "Protected tokens, one per line");

  auto* learn = app.add_subcommand("learn", "Learn merges from a corpus");
  std::string corpus = "-";
  size_t ops = 500;
  learn->add_option("--in", corpus, "Corpus (token lines or TSV pairs), '-' for stdin");
  learn->add_option("--ops", ops, "Number of merge operations");

  app.add_subcommand("apply", "Split stdin lines into subword pieces");
  app.add_subcommand("undo", "Rejoin subword pieces from stdin");

  CLI11_PARSE(app, argc, argv);
  const char* prot = protected_file.empty() ? nullptr : protected_file.c_str();

  if (learn->parsed()) {
    if (model.empty()) {
      std::cerr << "error: learn requires --model\n";
      return 1;
    }
    std::string in_path = corpus == "-" ? cli::materialize_stdin() : corpus;
    cli::check(mtf_bpe_learn(in_path.c_str(), ops, prot, model.c_str()));
    if (corpus == "-") std::remove(in_path.c_str());
    return 0;
  }

  if (app.get_subcommands().front()->get_name() == "apply") {
    if (model.empty()) {
      std::cerr << "error: apply requires --model\n";
      return 1;
    }
    mtf_bpe* h = nullptr;
    cli::check(mtf_bpe_open(model.c_str(), prot, &h));
    cli::pipe_lines([&](const std::string& line) {
      char* out = nullptr;
      cli::check(mtf_bpe_apply_line(h, line.c_str(), &out));
      return cli::owned(out);
    });
    mtf_bpe_free(h);
  } else {
    cli::pipe_lines([&](const std::string& line) {
      char* out = nullptr;
      cli::check(mtf_bpe_undo_line(line.c_str(), &out));
      return cli::owned(out);
    });
  }
  return 0;
}
