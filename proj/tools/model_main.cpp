#include <cstdio>
#include <vector>

#include <CLI11.hpp>

#include "cli_util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Toy transformer training, fine-tuning, translation"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train from scratch");
  std::string tr_config, tr_corpus, tr_ckpt;
  train->add_option("--config", tr_config, "Train config JSON")->required();
  train->add_option("--corpus", tr_corpus, "Training corpus TSV")->required();
  train->add_option("--ckpt", tr_ckpt, "Output checkpoint")->required();

  auto* ft = app.add_subcommand("finetune", "Continue training a checkpoint");
  std::string ft_config, ft_corpus, ft_in, ft_out, ft_denoise;
  ft->add_option("--config", ft_config)->required();
  ft->add_option("--corpus", ft_corpus, "In-domain corpus TSV")->required();
  ft->add_option("--ckpt", ft_in, "Base checkpoint")->required();
  ft->add_option("--out", ft_out, "Output checkpoint")->required();
  ft->add_option("--denoise", ft_denoise, "Target-denoising NoiseSpec JSON");

  auto* tr = app.add_subcommand("translate", "Translate stdin lines");
  std::string dec_ckpt;
  int beam = 4;
  tr->add_option("--ckpt", dec_ckpt)->required();
  tr->add_option("--beam", beam);

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  std::string plan;
  uint64_t seed = 1;
  int samples = 200;
  double eps = 1e-4;
  gc->add_option("--plan", plan, "BIG|DEEP|AAN|SELF_FIRST|AAN_FIRST (default: all)");
  gc->add_option("--seed", seed);
  gc->add_option("--samples", samples);
  gc->add_option("--eps", eps);

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    cli::check(mtf_model_train(tr_config.c_str(), tr_corpus.c_str(), tr_ckpt.c_str()));
  } else if (ft->parsed()) {
    cli::check(mtf_model_finetune(ft_config.c_str(), ft_corpus.c_str(), ft_in.c_str(),
                                  ft_denoise.empty() ? nullptr : ft_denoise.c_str(),
                                  ft_out.c_str()));
  } else if (tr->parsed()) {
    mtf_model* h = nullptr;
    cli::check(mtf_model_open(dec_ckpt.c_str(), &h));
    cli::pipe_lines([&](const std::string& line) {
      char* out = nullptr;
      cli::check(mtf_model_translate_line(h, line.c_str(), beam, &out));
      return cli::owned(out);
    });
    mtf_model_free(h);
  } else {
    std::vector<std::string> plans =
        plan.empty() ? std::vector<std::string>{"BIG", "AAN", "SELF_FIRST", "AAN_FIRST"}
                     : std::vector<std::string>{plan};
    bool ok = true;
    for (const auto& p : plans) {
      double err = 0.0;
      cli::check(mtf_model_gradcheck(p.c_str(), seed, samples, eps, &err));
      std::printf("%-11s max_rel_err %.3e %s\n", p.c_str(), err, err < 1e-3 ? "ok" : "FAIL");
      ok = ok && err < 1e-3;
    }
    return ok ? 0 : 1;
  }
  return 0;
}
