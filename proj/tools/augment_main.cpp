#include <vector>

#include <CLI11.hpp>

#include "cli_util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic data generation: noise, tagging, BT/FT/KD"};
  app.require_subcommand(1);

  auto* noise = app.add_subcommand("noise", "Corrupt source sides (unk/delete/swap)");
  std::string n_in, n_out, n_spec;
  uint64_t n_seed = 0;
  noise->add_option("--in", n_in)->required();
  noise->add_option("--out", n_out)->required();
  noise->add_option("--spec", n_spec, "NoiseSpec JSON");
  noise->add_option("--seed", n_seed, "Overrides the spec seed");

  auto* tag = app.add_subcommand("tag", "Prepend origin and domain tags");
  std::string t_in, t_out, t_origin = "REAL", t_domain = "BIO";
  tag->add_option("--in", t_in)->required();
  tag->add_option("--out", t_out)->required();
  tag->add_option("--origin", t_origin)->check(CLI::IsMember({"REAL", "BT", "FT", "NOISE"}));
  tag->add_option("--domain", t_domain)->check(CLI::IsMember({"BIO", "NEWS", "INHOUSE"}));

  auto* bt = app.add_subcommand("bt", "Back-translate target-language mono text");
  std::string b_mono, b_ckpt, b_spec, b_domain = "BIO", b_out;
  bt->add_option("--mono", b_mono)->required();
  bt->add_option("--ckpt", b_ckpt, "Reverse-direction checkpoint")->required();
  bt->add_option("--spec", b_spec, "SamplingSpec JSON");
  bt->add_option("--domain", b_domain);
  bt->add_option("--out", b_out)->required();

  auto* ft = app.add_subcommand("ft", "Forward-translate source-language mono text");
  std::string f_mono, f_domain = "BIO", f_out;
  std::vector<std::string> f_ckpts;
  int f_beam = 4;
  ft->add_option("--mono", f_mono)->required();
  ft->add_option("--ckpt", f_ckpts, "Ensemble member checkpoints")->required();
  ft->add_option("--beam", f_beam);
  ft->add_option("--domain", f_domain);
  ft->add_option("--out", f_out)->required();

  auto* kd = app.add_subcommand("kd", "Replace targets with teacher outputs");
  std::string k_in, k_ckpt, k_out;
  int k_beam = 4;
  kd->add_option("--in", k_in)->required();
  kd->add_option("--ckpt", k_ckpt, "Teacher checkpoint")->required();
  kd->add_option("--beam", k_beam);
  kd->add_option("--out", k_out)->required();

  auto* multi = app.add_subcommand("multi-bt", "Iterative back-translation");
  std::string m_bitext, m_mono_src, m_mono_tgt, m_spec, m_out, m_manifest;
  multi->add_option("--bitext", m_bitext)->required();
  multi->add_option("--mono-src", m_mono_src);
  multi->add_option("--mono-tgt", m_mono_tgt)->required();
  multi->add_option("--spec", m_spec, "MultiBtConfig JSON")->required();
  multi->add_option("--out", m_out)->required();
  multi->add_option("--manifest", m_manifest, "Per-round manifest JSON");

  CLI11_PARSE(app, argc, argv);

  if (noise->parsed()) {
    cli::check(mtf_augment_noise(n_in.c_str(), n_out.c_str(),
                                 n_spec.empty() ? nullptr : n_spec.c_str(), n_seed));
  } else if (tag->parsed()) {
    cli::check(mtf_augment_tag(t_in.c_str(), t_out.c_str(), t_origin.c_str(), t_domain.c_str()));
  } else if (bt->parsed()) {
    cli::check(mtf_augment_bt(b_mono.c_str(), b_ckpt.c_str(),
                              b_spec.empty() ? nullptr : b_spec.c_str(), b_domain.c_str(),
                              b_out.c_str()));
  } else if (ft->parsed()) {
    std::vector<const char*> ckpts;
    for (const auto& c : f_ckpts) ckpts.push_back(c.c_str());
    cli::check(mtf_augment_ft(f_mono.c_str(), ckpts.data(), ckpts.size(), f_beam,
                              f_domain.c_str(), f_out.c_str()));
  } else if (kd->parsed()) {
    cli::check(mtf_augment_kd(k_in.c_str(), k_ckpt.c_str(), k_beam, k_out.c_str()));
  } else {
    cli::check(mtf_augment_multi_bt(m_bitext.c_str(),
                                    m_mono_src.empty() ? nullptr : m_mono_src.c_str(),
                                    m_mono_tgt.c_str(), m_spec.c_str(), m_out.c_str(),
                                    m_manifest.empty() ? nullptr : m_manifest.c_str()));
  }
  return 0;
}
