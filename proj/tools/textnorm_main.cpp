#include <CLI11.hpp>

#include "cli_util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Text normalization, tokenization and case marking"};
  app.require_subcommand(1);

  std::string lang = "en", lexicon;
  app.add_option("--lang", lang, "Language: zh or en")->check(CLI::IsMember({"zh", "en"}));
  app.add_option("--lexicon", lexicon, "Segmenter lexicon, one word per line");

  for (const char* op : {"normalize", "tokenize", "mark-case", "unmark-case", "detok"})
    app.add_subcommand(op);

  CLI11_PARSE(app, argc, argv);
  std::string op = app.get_subcommands().front()->get_name();

  mtf_textnorm* h = nullptr;
  cli::check(mtf_textnorm_open(lang.c_str(), lexicon.empty() ? nullptr : lexicon.c_str(), &h));

  cli::pipe_lines([&](const std::string& line) {
    char* out = nullptr;
    cli::check(mtf_textnorm_line(h, op.c_str(), line.c_str(), &out));
    return cli::owned(out);
  });
  mtf_textnorm_free(h);
  return 0;
}
