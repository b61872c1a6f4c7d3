#include <cstdio>

#include <CLI11.hpp>

#include "cli_util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Config-driven MT pipeline runner"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Execute the configured stages");
  std::string config, until;
  bool resume = false;
  run->add_option("--config", config, "Pipeline config JSON")->required();
  run->add_flag("--resume", resume, "Skip stages whose manifests still match");
  run->add_option("--until", until, "Stop after this stage");

  CLI11_PARSE(app, argc, argv);

  char* digest = nullptr;
  cli::check(mtf_pipeline_run(config.c_str(), resume ? 1 : 0,
                              until.empty() ? nullptr : until.c_str(), &digest));
  std::printf("chain digest: %s\n", cli::owned(digest).c_str());
  return 0;
}
