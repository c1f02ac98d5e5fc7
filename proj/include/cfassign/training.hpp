#pragma once

// Unsupervised training of the assignment GNN with a staged augmented
// Lagrangian:
//
//   g = f - l1 * sum_k ReLU(L - sum_n s_kn) - 1/2 l2 * sum_n p_n
//         - v1 * sum_k ReLU(L - sum_n s_kn)^2 - 1/2 v2 * sum_n p_n^2
//
// Phase 1 ascends f alone. Phase 2 switches on the connection terms and
// raises (l1, v1) between inner loops until the held-in violation vanishes.
// Phase 3 does the same for the discreteness terms (l2, v2).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfassign/autodiff.hpp"
#include "cfassign/hpe_gnn.hpp"
#include "cfassign/problem.hpp"
#include "cfassign/scenario.hpp"

namespace cfa {

enum class Phase { Unconstrained = 0, Connection = 1, Discreteness = 2, Done = 3 };

std::string to_string(Phase phase);
Phase phase_from_string(const std::string& text);

struct AlmState {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double nu1 = 0.0;
  double nu2 = 0.0;
  double delta_nu = 0.1;
  Phase phase = Phase::Unconstrained;

  /// Moves to `next`; throws PhaseError on a backward transition.
  void advance(Phase next);
  bool operator==(const AlmState&) const = default;
};

/// g from per-sample terms; p holds p_n for every AP.
double alm_objective(double f, double conn_total, double conn_sq_total, const Eigen::VectorXd& p,
                     const AlmState& alm);

/// Connection: l1 += v1 * conn_total, v1 += dv. Discreteness: l2 += v2 *
/// p_total, v2 += dv. `which` must equal alm.phase.
AlmState multiplier_update(AlmState alm, double conn_total, double p_total, Phase which);

/// Batch means of the objective terms, recorded on the tape.
struct BatchObjective {
  ad::Var f;
  ad::Var conn;
  ad::Var conn_sq;
  ad::Var p_sum;
  ad::Var p_sq;
  ad::Var g;
};

BatchObjective batch_objective(ad::Tape& tape, const RunOutputs& outputs, const BatchPlan& plan,
                               const ad::Matrix& packed_gains, double noise_power,
                               int min_serving_aps, const AlmState& alm);

/// Everything needed to run inference.
struct Model {
  ModelConfig config;
  ad::ParamStore params;
  InputNormalization norm;
};

struct TrainConfig {
  double learning_rate = 3e-4;
  int batch_size = 64;
  int convergence_window = 200;
  double convergence_tol = 1e-4;
  int max_inner_iters = 2000;
  int max_outer_iters = 50;
  double delta_nu = 0.1;
  double violation_tol = 1e-6;
  double entropy_tol = 1e-3;
  /// Training samples (a fixed prefix) used for multiplier updates and
  /// phase-exit checks.
  int eval_batch_size = 1024;
  /// Test metrics are computed every `test_every` iterations.
  int test_every = 1;
  /// Samples per forward pass during evaluation.
  int eval_chunk = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MetricsRecord {
  std::int64_t iteration = 0;
  Phase phase = Phase::Unconstrained;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double nu1 = 0.0;
  double nu2 = 0.0;
  double train_f = 0.0;
  double test_f = 0.0;
  /// Training-batch penalties (mean per sample).
  double conn_pen = 0.0;
  double disc_pen = 0.0;
  /// Test-set penalties; NaN on iterations without a test pass.
  double test_conn_pen = 0.0;
  double test_disc_pen = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

class Metrics {
 public:
  /// Throws if the iteration index does not increase.
  void append(const MetricsRecord& record);
  const std::vector<MetricsRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  static const std::vector<std::string>& csv_columns();
  void write_csv(const std::filesystem::path& path) const;
  static Metrics read_csv(const std::filesystem::path& path);

 private:
  std::vector<MetricsRecord> records_;
};

/// Optimizer and schedule state at a phase boundary.
struct TrainState {
  AlmState alm;
  ad::AdamState adam;
  std::string rng_state;
  std::int64_t next_iteration = 0;
};

struct Checkpoint {
  Model model;
  std::optional<TrainState> train;
};

inline constexpr int kModelCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainHooks {
  /// Called at every phase boundary with the state needed to resume there.
  std::function<void(const Checkpoint&)> on_checkpoint;
  std::function<void(const MetricsRecord&)> on_record;
};

struct TrainResult {
  Model model;
  Metrics metrics;
  AlmState alm;
  /// False if a phase stopped on max_outer_iters instead of its exit test.
  bool connection_converged = true;
  bool discreteness_converged = true;
};

/// Runs the three phases. With `resume`, continues from that checkpoint's
/// phase; the metrics then hold only the rows produced after it.
TrainResult train(const Dataset& train_set, const Dataset& test_set, const ModelConfig& model_config,
                  const TrainConfig& config, const TrainHooks& hooks = {},
                  const Checkpoint* resume = nullptr);

struct EvalSummary {
  int samples = 0;
  double relaxed_sum_rate = 0.0;
  double binary_sum_rate = 0.0;
  /// Mean of sum_k ReLU(L - sum_n s_kn) on the relaxed output.
  double relaxed_connection_penalty = 0.0;
  /// Mean of sum_n p_n.
  double discreteness_penalty = 0.0;
  /// Mean entropy of one per-run column.
  double mean_run_entropy = 0.0;
  /// Samples whose binarized assignment breaks the per-AP / per-user limit.
  int upper_violations = 0;
  int lower_violations = 0;
  double feasible_fraction = 0.0;
  /// Fraction of (sample, AP) pairs where two runs picked the same user.
  double duplicate_pick_rate = 0.0;
  std::vector<double> binary_rates;
};

EvalSummary evaluate(const Model& model, const Dataset& dataset, int chunk = 256);

/// Per-sample per-run outputs for a whole dataset, computed in chunks.
std::vector<Assignment> infer(const Model& model, const Dataset& dataset, int chunk = 256);

}  // namespace cfa
