#pragma once

// Subcommand implementations behind the command-line front end. Each
// command writes into one output directory that also receives the resolved
// configuration and the tool version.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "experiment.hpp"

namespace cfa::cli {

std::string tool_version();

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

namespace files {
inline constexpr const char* kConfig = "config.ini";
inline constexpr const char* kVersion = "VERSION";
inline constexpr const char* kManifest = "manifest.txt";
inline constexpr const char* kTrainSet = "train.dataset";
inline constexpr const char* kTestSet = "test.dataset";
inline constexpr const char* kModel = "model.ckpt";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kCheckpoints = "checkpoints";
inline constexpr const char* kEval = "eval.csv";
inline constexpr const char* kBaselines = "baselines.csv";
inline constexpr const char* kComparison = "comparison.csv";
inline constexpr const char* kPlotData = "plot_data.csv";
}  // namespace files

/// Writes config.ini and VERSION into `out`, creating it if needed.
void write_provenance(const ExperimentConfig& config, const std::filesystem::path& out);

/// Rewrites manifest.txt with "sha256  name" for every regular file in
/// `out` except the manifest itself, sorted by name.
void write_manifest(const std::filesystem::path& out);

void cmd_gen_data(const ExperimentConfig& config, std::ostream& log);

/// With `resume`, training restarts from that phase-boundary checkpoint and
/// metrics rows before its iteration are kept from the existing CSV.
void cmd_train(const ExperimentConfig& config, const std::optional<std::filesystem::path>& resume,
               std::ostream& log);

void cmd_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
              std::ostream& log);

struct MethodRow {
  std::string method;
  std::string scenario;
  bool available = true;
  double mean_sum_rate = 0.0;
  double feasible_fraction = 0.0;
  int test_size = 0;
};

/// Exhaustive, random (mean of random_draws per sample) and GSD rows.
std::vector<MethodRow> run_baselines(const ExperimentConfig& config, const Dataset& test_set);

void write_rows(const std::vector<MethodRow>& rows, const std::filesystem::path& path);

void cmd_baseline(const ExperimentConfig& config, std::ostream& log);

/// Proposed (binarized GNN) followed by the baseline rows.
void cmd_compare(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                 std::ostream& log);

/// Long-format (figure, series, iteration, value) rows for the sum-rate,
/// connection-penalty and discreteness-penalty curves.
void cmd_viz(const ExperimentConfig& config, const std::filesystem::path& metrics_csv,
             std::ostream& log);

}  // namespace cfa::cli
