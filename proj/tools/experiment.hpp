#pragma once

// Experiment configuration: INI-style sections mirrored one-to-one into
// the structures used by the library.

#include <cstdint>
#include <filesystem>
#include <string>

#include "cfassign/baselines.hpp"
#include "cfassign/hpe_gnn.hpp"
#include "cfassign/scenario.hpp"
#include "cfassign/training.hpp"

namespace cfa::cli {

struct BaselineConfig {
  std::uint64_t budget = kDefaultEnumerationBudget;
  int random_draws = 100;
  bool require_lower = true;
  std::string gsd_variant = kGsdVariant;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  Scenario scenario = small_scenario();
  int train_size = 8192;
  int test_size = 1024;
  ModelConfig model;
  TrainConfig training;
  BaselineConfig baseline;

  std::uint64_t train_seed() const { return seed; }
  std::uint64_t test_seed() const { return seed + 1; }
  void validate() const;
};

/// Defaults for a named preset ("small" or "large").
ExperimentConfig default_config(const std::string& scenario_name);

/// Reads an INI file. Keys absent from the file keep their defaults;
/// scenario.name selects the preset the defaults come from. Unknown
/// sections or keys raise SchemaError.
ExperimentConfig load_config(const std::filesystem::path& path);

void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

/// Replaces the scenario with a preset, or keeps the configured custom one.
void select_scenario(ExperimentConfig& config, const std::string& name);

}  // namespace cfa::cli
