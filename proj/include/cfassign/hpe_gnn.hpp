#pragma once

// Hierarchically permutation-equivariant GNN for AP-user assignment.
//
// One graph node per AP. A layer computes, for every node n,
//
//   F_n' = gamma(F_n, mean_{m in N(n)} phi(F_m, e_mn))
//
// where phi only reads the sender's feature, so a message is computable at
// the sending AP. phi, gamma and the output head are PE units: a per-user
// branch concatenated with a user-averaged branch, followed by a shared
// affine map. The network runs U times; run u sees the gains plus two gaps
// computed from earlier runs, ReLU(L - sum_mu s_kn) for the pair and
// ReLU(L - sum_mu sum_n s_kn) for the user, and emits a softmax over users
// per AP.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cfassign/autodiff.hpp"
#include "cfassign/scenario.hpp"

namespace cfa {

enum class TopologyRule { Full, KNearest };

struct TopologySpec {
  TopologyRule rule = TopologyRule::Full;
  int k = 0;  // used by KNearest

  bool operator==(const TopologySpec&) const = default;
};

std::string to_string(const TopologySpec& spec);
/// "full" or "knn:<k>".
TopologySpec topology_from_string(const std::string& text);

struct Edge {
  int src = 0;
  int dst = 0;
  /// Inter-AP distance over the area diagonal.
  double feature = 0.0;
};

struct GraphTopology {
  int n_nodes = 0;
  /// Directed edges sorted by (dst, src).
  std::vector<Edge> edges;
  /// in_neighbors[n] lists every m with an edge m -> n, ascending.
  std::vector<std::vector<int>> in_neighbors;

  std::size_t edge_count() const { return edges.size(); }
  /// Feature of edge m -> n; throws if absent.
  double edge_feature(int m, int n) const;
};

/// Full: complete graph. KNearest: every AP selects the APs within its k-th
/// smallest distance (ties included); an undirected edge exists if either
/// endpoint selected the other.
GraphTopology build_graph(const Scenario& scenario, const TopologySpec& spec);

/// Topology with nodes relabeled: node n of the result is node perm[n] of
/// the input.
GraphTopology permute_topology(const GraphTopology& topology, const std::vector<int>& perm);

struct ModelConfig {
  int layers = 2;
  int hidden_width = 16;
  int message_width = 8;
  TopologySpec topology;

  bool operator==(const ModelConfig&) const = default;
};

/// Log-gain standardization: g_hat = (log10(g / sigma2) - mean) / stddev.
struct InputNormalization {
  double mean = 0.0;
  double stddev = 1.0;

  bool operator==(const InputNormalization&) const = default;
};

InputNormalization fit_normalization(const Dataset& dataset);

/// Widths of one PE unit: in -> (hidden | hidden) -> out.
struct PeShape {
  int in = 0;
  int hidden = 0;
  int out = 0;

  std::size_t parameter_count() const;
};

/// Parameter names of a PE unit rooted at `prefix`: W1c b1c W1a b1a W2 b2.
struct PeNames {
  std::string w1c, b1c, w1a, b1a, w2, b2;
  explicit PeNames(const std::string& prefix);
};

inline constexpr int kInputFeatures = 3;  // normalized gain, pair gap, user gap
inline constexpr int kEdgeFeatures = 1;

std::vector<std::pair<std::string, PeShape>> pe_layout(const ModelConfig& config);

ad::ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

/// Exact scalar parameter count; depends on widths and depth only.
std::size_t parameter_count(const ad::ParamStore& params);
std::size_t parameter_count(const ModelConfig& config);

/// Single PE unit forward on a (features x users) block or a batch of
/// user groups of size `group`. With `linear_out` the final ReLU is skipped.
ad::Var pe_unit_forward(ad::Tape& tape, const ad::ParamStore& params, const PeNames& names,
                        const ad::Var& input, int group, bool linear_out = false);

/// Column index maps shared by every forward pass over B samples of one
/// (topology, K). Node columns are (b * N + n) * K + k; edge columns are
/// (b * E + e) * K + k.
struct BatchPlan {
  int batch = 0;
  int n_aps = 0;
  int n_users = 0;
  int n_edges = 0;
  /// Edge column -> sender node column.
  std::shared_ptr<const std::vector<int>> edge_source;
  /// 1 x (B E K) edge feature row.
  ad::Matrix edge_features;
  /// (B E K) x (B N K): mean over in-neighbors at the receiver.
  std::shared_ptr<const ad::SparseMatrix> aggregate;
  /// (B N K) x (B K): sum over APs for each (sample, user).
  std::shared_ptr<const ad::SparseMatrix> sum_over_aps;
  /// Transpose of sum_over_aps: copies a (sample, user) value to every AP.
  std::shared_ptr<const ad::SparseMatrix> spread_over_aps;
  /// (B N K) x (B N): sum over users for each (sample, AP).
  std::shared_ptr<const ad::SparseMatrix> sum_over_users;

  int node_columns() const { return batch * n_aps * n_users; }
};

BatchPlan make_batch_plan(const GraphTopology& topology, int n_users, int batch);

/// Packs K x N gain matrices into node-column order: 1 x (B N K).
ad::Matrix pack_gains(const std::vector<const Eigen::MatrixXd*>& gains);
ad::Matrix normalize_gains(const ad::Matrix& packed, double noise_power,
                           const InputNormalization& norm);
/// Inverse of pack_gains for one sample of a packed row.
Eigen::MatrixXd unpack_sample(const ad::Matrix& packed, int sample, int n_aps, int n_users);

struct RunOutputs {
  /// Per run, 1 x (B N K) softmax outputs.
  std::vector<ad::Var> runs;
  /// 1 - prod_u (1 - s^(u)): stays in [0, 1], equals the run sum for
  /// distinct one-hot picks and collapses duplicates like binarize.
  ad::Var combined;
};

/// Fused uses the single-node ad::pe_unit; Reference composes the unit from
/// elementary ops. Both compute the same function.
enum class ForwardMode { Fused, Reference };

/// Batched U-run forward pass recorded on `tape`.
RunOutputs forward_runs(ad::Tape& tape, const ad::ParamStore& params, const ModelConfig& config,
                        const BatchPlan& plan, const ad::Matrix& normalized_gains, int runs,
                        int min_serving_aps, ForwardMode mode = ForwardMode::Fused);

/// Per-run slices and their combination, each K x N.
struct Assignment {
  std::vector<Eigen::MatrixXd> runs;
  Eigen::MatrixXd combined;
};

Assignment recurrent_assign(const ad::ParamStore& params, const ModelConfig& config,
                            const Eigen::MatrixXd& gains, const GraphTopology& topology, int runs,
                            int min_serving_aps, double noise_power,
                            const InputNormalization& norm = {});

/// Floats shipped over inter-AP links for one full U-run inference, in bytes
/// (8 per value). `local` ships one message per directed edge per layer per
/// run; `generic` additionally ships the receiver's feature to the sender, as
/// a message function that reads both endpoints would require.
struct FronthaulBytes {
  std::uint64_t local = 0;
  std::uint64_t generic = 0;
};

FronthaulBytes fronthaul_bytes(const GraphTopology& topology, const ModelConfig& config,
                               int n_users, int runs);

}  // namespace cfa
