#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmr/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-class margin scoring and selective-sampling training"};
  app.set_version_flag("--version", std::string(mmr::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  mmr::GlobalOptions global;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto* seed_opt = app.add_option("--seed", seed, "Override the run seed")->expected(1);
  auto* out_opt = app.add_option("--out-dir", out_dir, "Override the output directory");
  app.add_option("--threads", global.threads, "OpenMP threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  std::string config;

  auto* train = app.add_subcommand("train", "Train one configuration");
  train->add_option("config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);

  std::vector<std::string> policies{"mms", "random"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::optional<double> target;
  auto* compare = app.add_subcommand("compare", "Compare selection policies over seeds");
  compare->add_option("config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  compare->add_option("--policies", policies, "mms, random, hard-negative, entropy")->delimiter(',');
  compare->add_option("--seeds", seeds, "Training seeds")->delimiter(',');
  compare->add_option("--target", target, "Validation accuracy target in [0, 1]")
      ->check(CLI::Range(0.0, 1.0));

  std::vector<std::string> alphas{"0", "1e-5", "1e-4", "1e-3"};
  std::vector<std::uint64_t> sweep_seeds;
  auto* sweep = app.add_subcommand("sweep-alpha", "Sweep the margin penalty weight");
  sweep->add_option("config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--alphas", alphas, "Penalty weights")->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "Training seeds (default: the config seed)")->delimiter(',');

  std::string checkpoint;
  std::string score_out = "scores.csv";
  mmr::ScoreSource source;
  std::string data_csv;
  std::string run_config;
  auto* score = app.add_subcommand("score", "Score samples with a trained checkpoint");
  score->add_option("checkpoint", checkpoint, "Model checkpoint (JSON)")->required()->check(CLI::ExistingFile);
  auto* data_opt = score->add_option("--data", data_csv, "CSV to score")->check(CLI::ExistingFile);
  score->add_option("--label-column", source.label_column, "Label column name");
  auto* cfg_opt = score->add_option("--config", run_config, "Regenerate a run's data split instead")
                      ->check(CLI::ExistingFile)
                      ->excludes(data_opt);
  score->add_option("--split", source.split, "train, validation or test")
      ->check(CLI::IsMember({"train", "validation", "test"}))
      ->needs(cfg_opt);
  score->add_option("-o,--output", score_out, "Output CSV");

  std::size_t models = 100;
  std::size_t classes = 3;
  bool frozen_phi = false;
  std::string loss = "ce";
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the composite gradient");
  gradcheck->add_option("--models", models, "Random models to check")->check(CLI::PositiveNumber);
  gradcheck->add_option("--classes", classes, "Classes per model")->check(CLI::Range(2, 64));
  gradcheck->add_option("--loss", loss, "ce or hinge")->check(CLI::IsMember({"ce", "hinge"}));
  gradcheck->add_flag("--frozen-phi", frozen_phi, "Treat the batch feature norm as a constant");

  std::size_t draws = 10000;
  auto* oracle = app.add_subcommand("oracle-sweep", "Compare fast margin scores against brute force");
  oracle->add_option("--draws", draws, "Random draws")->check(CLI::PositiveNumber);

  mmr::DataSpec spec;
  std::string gen_out = "blobs.csv";
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic Gaussian-blob dataset");
  gen->add_option("--classes", spec.n_classes, "Classes")->check(CLI::Range(2, 1000));
  gen->add_option("--dim", spec.dim, "Feature dimension")->check(CLI::Range(2, 100000));
  gen->add_option("--per-class", spec.per_class, "Rows per class")->check(CLI::PositiveNumber);
  gen->add_option("--radius", spec.center_radius, "Radius of the class-mean circle");
  gen->add_option("--sigma", spec.sigma, "Noise standard deviation")->check(CLI::PositiveNumber);
  gen->add_option("-o,--output", gen_out, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? mmr::kExitOk : mmr::kExitConfigError;
  }

  if (*seed_opt) global.seed = seed;
  if (*out_opt) global.out_dir = out_dir;

  if (*train) return mmr::cmd_train(config, global, std::cout, std::cerr);
  if (*compare) return mmr::cmd_compare(config, policies, seeds, target, global, std::cout, std::cerr);
  if (*sweep) return mmr::cmd_sweep_alpha(config, alphas, sweep_seeds, global, std::cout, std::cerr);
  if (*score) {
    if (*data_opt) source.csv = data_csv;
    if (*cfg_opt) source.config = run_config;
    return mmr::cmd_score(checkpoint, source, score_out, std::cout, std::cerr);
  }
  if (*gradcheck) return mmr::cmd_gradcheck(models, classes, !frozen_phi, loss, global, std::cout, std::cerr);
  if (*oracle) return mmr::cmd_oracle_sweep(draws, global, std::cout, std::cerr);
  if (*gen) {
    if (*seed_opt) spec.seed = seed;
    return mmr::cmd_gen_data(spec, gen_out, std::cout, std::cerr);
  }
  return mmr::kExitFailure;
}
