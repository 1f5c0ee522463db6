// shield: corpus generation, training, evaluation and export for the
// anti-forensic attack / SHIELD defense experiments.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shield/cli/commands.hpp"

namespace {

using namespace shield;

std::vector<afgan::GenId> gen_flag(const std::vector<std::string>& values) {
  std::vector<afgan::GenId> out;
  for (const auto& v : values)
    for (auto g : parse_gen_list(v)) out.push_back(g);
  return out;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_input: return 1;
    case ErrorKind::missing_dependency: return 2;
    case ErrorKind::invariant: return 3;
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anti-forensic GAN attacks and the SHIELD defense on toy audio deepfake detectors"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  int jobs = 1;
  std::vector<std::string> gen, attack_gen, defense_gen, clips;
  std::string settings = "both";
  std::string d_loss_form;
  bool include_plain_fakes = false;
  bool allow_mixed = false;

  const auto common = [&](CLI::App* c) {
    c->add_option("--config", config_path, "Flat JSON config file")->check(CLI::ExistingFile);
    c->add_option("--seed", seed, "Global seed (overrides the config)");
    c->add_option("--out", out, "Output directory")->capture_default_str();
    c->add_option("--jobs", jobs, "Concurrent evaluation cells")->check(CLI::Range(1, 256))->capture_default_str();
    c->add_option("--gen", gen, "Generators, e.g. G1 or G1,G3");
    c->add_option("--include-plain-fakes", include_plain_fakes, "Pair unattacked fakes as attacked_pair")->expected(0, 1)->default_str("true");
    c->add_option("--d-loss-form", d_loss_form, "Discriminator loss form")->check(CLI::IsMember({"standard", "as_printed"}));
  };

  auto* gen_corpus = app.add_subcommand("gen-corpus", "Write the synthetic corpus and its manifest");
  common(gen_corpus);

  auto* train = app.add_subcommand("train", "Train one stage");
  train->require_subcommand(1);
  auto* train_detector = train->add_subcommand("detector", "Victim and surrogate detectors");
  auto* train_attack = train->add_subcommand("attack", "Anti-forensic GANs");
  auto* train_defense = train->add_subcommand("defense", "Defense generators");
  auto* train_shield = train->add_subcommand("shield", "SHIELD embedder and classifier");
  for (auto* c : {train_detector, train_attack, train_defense, train_shield}) common(c);
  train_attack->add_option("--attack-gen", attack_gen, "Attack generators");
  train_defense->add_option("--defense-gen", defense_gen, "Defense generators");
  train_shield->add_option("--defense-gen", defense_gen, "Defense generators");

  auto* eval = app.add_subcommand("eval", "Run an evaluation grid");
  eval->require_subcommand(1);
  auto* eval_baseline = eval->add_subcommand("baseline", "Detector accuracy");
  auto* eval_attack = eval->add_subcommand("attack", "Detector accuracy under attack");
  auto* eval_defense = eval->add_subcommand("defense", "SHIELD accuracy, match and mismatch");
  auto* eval_corr = eval->add_subcommand("correlation", "Clip/reconstruction correlation");
  for (auto* c : {eval_baseline, eval_attack, eval_defense, eval_corr}) {
    common(c);
    c->add_option("--allow-mixed", allow_mixed, "Accept checkpoints from different configs")->expected(0, 1)->default_str("true");
  }
  for (auto* c : {eval_attack, eval_defense, eval_corr}) c->add_option("--attack-gen", attack_gen, "Attack generators");
  for (auto* c : {eval_defense, eval_corr}) c->add_option("--defense-gen", defense_gen, "Defense generators");
  eval_defense->add_option("--settings", settings, "match, mismatch or both")->check(CLI::IsMember({"match", "mismatch", "both"}))->capture_default_str();

  auto* exp = app.add_subcommand("export", "Write plots and embeddings");
  exp->require_subcommand(1);
  auto* exp_spec = exp->add_subcommand("spectrogram", "Log-mel spectrogram images and CSVs");
  auto* exp_emb = exp->add_subcommand("embeddings", "SHIELD embeddings of held-out pairs");
  for (auto* c : {exp_spec, exp_emb}) {
    common(c);
    c->add_option("--attack-gen", attack_gen, "Attack generators");
    c->add_option("--allow-mixed", allow_mixed, "Accept checkpoints from different configs")->expected(0, 1)->default_str("true");
  }
  exp_spec->add_option("--clip", clips, "Clip ids from the manifest");
  exp_emb->add_option("--defense-gen", defense_gen, "Defense generators");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    cli::Options o;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      o.config = parse_config(ss.str(), config_path);
    }
    if (seed) o.config.seed = *seed;
    if (!d_loss_form.empty()) o.config.d_loss_form = *afgan::parse_d_loss_form(d_loss_form);
    if (include_plain_fakes) o.config.include_plain_fakes = true;
    o.out = out;
    o.jobs = jobs;
    o.gens = gen_flag(gen);
    o.attack_gens = gen_flag(attack_gen);
    o.defense_gens = gen_flag(defense_gen);
    o.settings = *eval::parse_settings(settings);
    o.allow_mixed = allow_mixed;
    o.clips = clips;
    o.config.validate();

    if (gen_corpus->parsed()) cli::cmd_gen_corpus(o);
    if (train_detector->parsed()) cli::cmd_train(cli::TrainStage::detector, o);
    if (train_attack->parsed()) cli::cmd_train(cli::TrainStage::attack, o);
    if (train_defense->parsed()) cli::cmd_train(cli::TrainStage::defense, o);
    if (train_shield->parsed()) cli::cmd_train(cli::TrainStage::shield, o);
    if (eval_baseline->parsed()) cli::cmd_eval(cli::EvalGrid::baseline, o);
    if (eval_attack->parsed()) cli::cmd_eval(cli::EvalGrid::attack, o);
    if (eval_defense->parsed()) cli::cmd_eval(cli::EvalGrid::defense, o);
    if (eval_corr->parsed()) cli::cmd_eval(cli::EvalGrid::correlation, o);
    if (exp_spec->parsed()) cli::cmd_export(cli::ExportKind::spectrogram, o);
    if (exp_emb->parsed()) cli::cmd_export(cli::ExportKind::embeddings, o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
