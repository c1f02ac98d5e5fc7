#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfassign/errors.hpp"
#include "commands.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string scenario;
  std::string out;
  std::string resume;
  std::optional<std::uint64_t> budget;
  std::string checkpoint;
  std::string metrics;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "Experiment configuration (INI)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed (train split = seed, test split = seed + 1)");
  cmd->add_option("--scenario", o.scenario, "Scenario preset")
      ->check(CLI::IsMember({"small", "large", "custom"}));
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--budget", o.budget, "Exhaustive-search enumeration budget");
}

cfa::cli::ExperimentConfig resolve(const Options& o) {
  auto config = o.config_path.empty() ? cfa::cli::default_config("small")
                                      : cfa::cli::load_config(o.config_path);
  if (!o.scenario.empty()) cfa::cli::select_scenario(config, o.scenario);
  if (o.seed) config.seed = *o.seed;
  if (!o.out.empty()) config.output_dir = o.out;
  if (o.budget) config.baseline.budget = *o.budget;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Access point - user assignment with a permutation-equivariant GNN"};
  app.set_version_flag("--version", cfa::cli::tool_version());
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Generate training and test datasets");
  auto* train = app.add_subcommand("train", "Train the assignment GNN");
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model on the test set");
  auto* base = app.add_subcommand("baseline", "Run exhaustive, random and GSD baselines");
  auto* compare = app.add_subcommand("compare", "Compare the trained model with the baselines");
  auto* viz = app.add_subcommand("viz", "Export plot-ready curves from a metrics file");
  for (auto* cmd : {gen, train, eval, base, compare, viz}) add_common(cmd, o);
  train->add_option("--resume", o.resume, "Phase-boundary checkpoint to resume from")
      ->check(CLI::ExistingFile);
  for (auto* cmd : {eval, compare}) {
    cmd->add_option("--checkpoint", o.checkpoint, "Model checkpoint (default OUT/model.ckpt)")
        ->check(CLI::ExistingFile);
  }
  viz->add_option("--metrics", o.metrics, "Metrics CSV (default OUT/metrics.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  cfa::cli::ExperimentConfig config;
  try {
    config = resolve(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  const std::filesystem::path out = config.output_dir;
  try {
    if (gen->parsed()) {
      cfa::cli::cmd_gen_data(config, std::cout);
    } else if (train->parsed()) {
      std::optional<std::filesystem::path> resume;
      if (!o.resume.empty()) resume = o.resume;
      cfa::cli::cmd_train(config, resume, std::cout);
    } else if (eval->parsed() || compare->parsed()) {
      const std::filesystem::path ckpt =
          o.checkpoint.empty() ? out / cfa::cli::files::kModel : std::filesystem::path(o.checkpoint);
      if (eval->parsed()) {
        cfa::cli::cmd_eval(config, ckpt, std::cout);
      } else {
        cfa::cli::cmd_compare(config, ckpt, std::cout);
      }
    } else if (base->parsed()) {
      cfa::cli::cmd_baseline(config, std::cout);
    } else if (viz->parsed()) {
      const std::filesystem::path metrics =
          o.metrics.empty() ? out / cfa::cli::files::kMetrics : std::filesystem::path(o.metrics);
      cfa::cli::cmd_viz(config, metrics, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
