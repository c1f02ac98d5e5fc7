#include "cfassign/hpe_gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfassign/errors.hpp"

namespace cfa {

using ad::Matrix;
using ad::Tape;
using ad::Var;

std::string to_string(const TopologySpec& spec) {
  return spec.rule == TopologyRule::Full ? "full" : "knn:" + std::to_string(spec.k);
}

TopologySpec topology_from_string(const std::string& text) {
  if (text == "full") return {TopologyRule::Full, 0};
  if (text.rfind("knn:", 0) == 0) {
    try {
      return {TopologyRule::KNearest, std::stoi(text.substr(4))};
    } catch (const std::exception&) {
    }
  }
  throw Error("unknown topology rule '" + text + "' (expected full or knn:<k>)");
}

double GraphTopology::edge_feature(int m, int n) const {
  for (const auto& e : edges) {
    if (e.src == m && e.dst == n) return e.feature;
  }
  throw Error("no edge " + std::to_string(m) + " -> " + std::to_string(n));
}

namespace {

GraphTopology from_edges(int n_nodes, std::vector<Edge> edges) {
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
  });
  GraphTopology g;
  g.n_nodes = n_nodes;
  g.in_neighbors.assign(n_nodes, {});
  for (const auto& e : edges) g.in_neighbors[e.dst].push_back(e.src);
  g.edges = std::move(edges);
  return g;
}

}  // namespace

GraphTopology build_graph(const Scenario& scenario, const TopologySpec& spec) {
  const int n = scenario.n_aps;
  const auto& pos = scenario.ap_positions;
  if (static_cast<int>(pos.size()) != n) throw InvalidScenarioError("ap_positions size != n_aps");
  std::vector<std::vector<bool>> linked(n, std::vector<bool>(n, false));
  if (spec.rule == TopologyRule::Full) {
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) linked[a][b] = a != b;
    }
  } else {
    if (spec.k < 1 || spec.k >= n) throw Error("knn topology needs 1 <= k < n_aps");
    for (int a = 0; a < n; ++a) {
      std::vector<double> d;
      for (int b = 0; b < n; ++b) {
        if (b != a) d.push_back(distance(pos[a], pos[b]));
      }
      std::nth_element(d.begin(), d.begin() + (spec.k - 1), d.end());
      const double radius = d[spec.k - 1];
      for (int b = 0; b < n; ++b) {
        if (b != a && distance(pos[a], pos[b]) <= radius) {
          linked[a][b] = true;
          linked[b][a] = true;
        }
      }
    }
  }
  const double diag = scenario.area.diagonal();
  std::vector<Edge> edges;
  for (int src = 0; src < n; ++src) {
    for (int dst = 0; dst < n; ++dst) {
      if (linked[src][dst]) edges.push_back({src, dst, distance(pos[src], pos[dst]) / diag});
    }
  }
  return from_edges(n, std::move(edges));
}

GraphTopology permute_topology(const GraphTopology& topology, const std::vector<int>& perm) {
  const int n = topology.n_nodes;
  if (static_cast<int>(perm.size()) != n) throw DimensionError("permutation size != node count");
  std::vector<int> inverse(n, -1);
  for (int i = 0; i < n; ++i) inverse.at(perm[i]) = i;
  std::vector<Edge> edges;
  edges.reserve(topology.edges.size());
  for (const auto& e : topology.edges) edges.push_back({inverse[e.src], inverse[e.dst], e.feature});
  return from_edges(n, std::move(edges));
}

InputNormalization fit_normalization(const Dataset& dataset) {
  double sum = 0.0;
  double sumsq = 0.0;
  std::size_t count = 0;
  const double sigma2 = dataset.scenario.noise_power;
  for (const auto& s : dataset.samples) {
    for (Eigen::Index i = 0; i < s.gains.size(); ++i) {
      const double x = std::log10(std::max(s.gains.data()[i] / sigma2, 1e-12));
      sum += x;
      sumsq += x * x;
      ++count;
    }
  }
  InputNormalization norm;
  if (count == 0) return norm;
  norm.mean = sum / count;
  const double var = sumsq / count - norm.mean * norm.mean;
  norm.stddev = var > 1e-24 ? std::sqrt(var) : 1.0;
  return norm;
}

std::size_t PeShape::parameter_count() const {
  const auto i = static_cast<std::size_t>(in);
  const auto h = static_cast<std::size_t>(hidden);
  const auto o = static_cast<std::size_t>(out);
  return 2 * (h * i + h) + o * 2 * h + o;
}

PeNames::PeNames(const std::string& prefix)
    : w1c(prefix + ".W1c"),
      b1c(prefix + ".b1c"),
      w1a(prefix + ".W1a"),
      b1a(prefix + ".b1a"),
      w2(prefix + ".W2"),
      b2(prefix + ".b2") {}

namespace {

std::string phi_prefix(int layer) { return "layer" + std::to_string(layer) + ".phi"; }
std::string gamma_prefix(int layer) { return "layer" + std::to_string(layer) + ".gamma"; }
const std::string kHeadPrefix = "head";

}  // namespace

std::vector<std::pair<std::string, PeShape>> pe_layout(const ModelConfig& config) {
  if (config.layers < 0 || config.hidden_width < 1 || config.message_width < 1) {
    throw Error("model widths must be positive and layers non-negative");
  }
  std::vector<std::pair<std::string, PeShape>> out;
  int width = kInputFeatures;
  for (int i = 0; i < config.layers; ++i) {
    out.push_back({phi_prefix(i), {width + kEdgeFeatures, config.message_width, config.message_width}});
    out.push_back({gamma_prefix(i), {width + config.message_width, config.hidden_width, config.hidden_width}});
    width = config.hidden_width;
  }
  out.push_back({kHeadPrefix, {width, config.hidden_width, 1}});
  return out;
}

ad::ParamStore init_params(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::ParamStore params;
  for (const auto& [prefix, shape] : pe_layout(config)) {
    const PeNames names(prefix);
    params.add(names.w1c, ad::glorot_uniform(shape.hidden, shape.in, rng));
    params.add(names.b1c, Matrix::Zero(shape.hidden, 1));
    params.add(names.w1a, ad::glorot_uniform(shape.hidden, shape.in, rng));
    params.add(names.b1a, Matrix::Zero(shape.hidden, 1));
    params.add(names.w2, ad::glorot_uniform(shape.out, 2 * shape.hidden, rng));
    params.add(names.b2, Matrix::Zero(shape.out, 1));
  }
  return params;
}

std::size_t parameter_count(const ad::ParamStore& params) { return params.scalar_count(); }

std::size_t parameter_count(const ModelConfig& config) {
  std::size_t total = 0;
  for (const auto& [prefix, shape] : pe_layout(config)) total += shape.parameter_count();
  return total;
}

Var pe_unit_forward(Tape& tape, const ad::ParamStore& params, const PeNames& names,
                    const Var& input, int group, bool linear_out) {
  const Var current = ad::relu(ad::add_col_broadcast(
      ad::matmul(tape.param(params, names.w1c), input), tape.param(params, names.b1c)));
  const Var all = ad::mean_over_users(
      ad::relu(ad::add_col_broadcast(ad::matmul(tape.param(params, names.w1a), input),
                                     tape.param(params, names.b1a))),
      group);
  const Var out = ad::add_col_broadcast(
      ad::matmul(tape.param(params, names.w2), ad::concat_rows(current, all)),
      tape.param(params, names.b2));
  return linear_out ? out : ad::relu(out);
}

BatchPlan make_batch_plan(const GraphTopology& topology, int n_users, int batch) {
  if (n_users < 1 || batch < 1) throw DimensionError("batch plan needs K >= 1 and B >= 1");
  BatchPlan plan;
  plan.batch = batch;
  plan.n_aps = topology.n_nodes;
  plan.n_users = n_users;
  plan.n_edges = static_cast<int>(topology.edges.size());
  const int N = plan.n_aps;
  const int K = n_users;
  const int E = plan.n_edges;
  const int node_cols = batch * N * K;
  const int edge_cols = batch * E * K;

  std::vector<int> in_degree(N, 0);
  for (const auto& e : topology.edges) ++in_degree[e.dst];

  auto source = std::make_shared<std::vector<int>>(edge_cols);
  plan.edge_features.resize(1, edge_cols);
  std::vector<Eigen::Triplet<double>> agg;
  agg.reserve(edge_cols);
  for (int b = 0; b < batch; ++b) {
    for (int e = 0; e < E; ++e) {
      const auto& edge = topology.edges[e];
      for (int k = 0; k < K; ++k) {
        const int col = (b * E + e) * K + k;
        (*source)[col] = (b * N + edge.src) * K + k;
        plan.edge_features(0, col) = edge.feature;
        agg.emplace_back(col, (b * N + edge.dst) * K + k, 1.0 / in_degree[edge.dst]);
      }
    }
  }
  plan.edge_source = std::move(source);
  auto aggregate = std::make_shared<ad::SparseMatrix>(edge_cols, node_cols);
  aggregate->setFromTriplets(agg.begin(), agg.end());
  plan.aggregate = std::move(aggregate);

  std::vector<Eigen::Triplet<double>> over_aps;
  std::vector<Eigen::Triplet<double>> over_users;
  over_aps.reserve(node_cols);
  over_users.reserve(node_cols);
  for (int b = 0; b < batch; ++b) {
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < K; ++k) {
        const int col = (b * N + n) * K + k;
        over_aps.emplace_back(col, b * K + k, 1.0);
        over_users.emplace_back(col, b * N + n, 1.0);
      }
    }
  }
  auto sa = std::make_shared<ad::SparseMatrix>(node_cols, batch * K);
  sa->setFromTriplets(over_aps.begin(), over_aps.end());
  plan.spread_over_aps = std::make_shared<ad::SparseMatrix>(sa->transpose());
  plan.sum_over_aps = std::move(sa);
  auto su = std::make_shared<ad::SparseMatrix>(node_cols, batch * N);
  su->setFromTriplets(over_users.begin(), over_users.end());
  plan.sum_over_users = std::move(su);
  return plan;
}

Matrix pack_gains(const std::vector<const Eigen::MatrixXd*>& gains) {
  if (gains.empty()) return Matrix(1, 0);
  const auto K = gains.front()->rows();
  const auto N = gains.front()->cols();
  Matrix packed(1, static_cast<Eigen::Index>(gains.size()) * N * K);
  for (std::size_t b = 0; b < gains.size(); ++b) {
    const auto& g = *gains[b];
    if (g.rows() != K || g.cols() != N) throw DimensionError("pack_gains: mixed sample shapes");
    for (Eigen::Index n = 0; n < N; ++n) {
      for (Eigen::Index k = 0; k < K; ++k) {
        packed(0, (static_cast<Eigen::Index>(b) * N + n) * K + k) = g(k, n);
      }
    }
  }
  return packed;
}

Matrix normalize_gains(const Matrix& packed, double noise_power, const InputNormalization& norm) {
  return packed.unaryExpr([&](double g) {
    return (std::log10(std::max(g / noise_power, 1e-12)) - norm.mean) / norm.stddev;
  });
}

Eigen::MatrixXd unpack_sample(const Matrix& packed, int sample, int n_aps, int n_users) {
  Eigen::MatrixXd out(n_users, n_aps);
  for (int n = 0; n < n_aps; ++n) {
    for (int k = 0; k < n_users; ++k) {
      out(k, n) = packed(0, (static_cast<Eigen::Index>(sample) * n_aps + n) * n_users + k);
    }
  }
  return out;
}

RunOutputs forward_runs(Tape& tape, const ad::ParamStore& params, const ModelConfig& config,
                        const BatchPlan& plan, const Matrix& normalized_gains, int runs,
                        int min_serving_aps, ForwardMode mode) {
  if (runs < 1) throw Error("at least one run is required");
  if (normalized_gains.rows() != 1 || normalized_gains.cols() != plan.node_columns()) {
    throw DimensionError("normalized gains do not match the batch plan");
  }
  const int K = plan.n_users;
  const double L = static_cast<double>(min_serving_aps);
  const Var gains = tape.constant(normalized_gains);
  const Var edge_features = tape.constant(plan.edge_features);
  const PeNames head(kHeadPrefix);
  std::vector<PeNames> phi;
  std::vector<PeNames> gamma;
  for (int i = 0; i < config.layers; ++i) {
    phi.emplace_back(phi_prefix(i));
    gamma.emplace_back(gamma_prefix(i));
  }

  auto weights = [&](const PeNames& names) {
    return ad::PeWeights{tape.param(params, names.w1c), tape.param(params, names.b1c),
                         tape.param(params, names.w1a), tape.param(params, names.b1a),
                         tape.param(params, names.w2),  tape.param(params, names.b2)};
  };

  RunOutputs out;
  Var accumulated;
  Var missed;  // prod_u (1 - s^(u))
  for (int u = 0; u < runs; ++u) {
    // gaps before run u, from sum_{mu < u} s^(mu)
    const Var gap = u == 0 ? tape.constant(Matrix::Constant(1, plan.node_columns(), L))
                           : ad::relu(ad::add_scalar(ad::scale(accumulated, -1.0), L));
    const Var user_gap =
        u == 0 ? tape.constant(Matrix::Constant(1, plan.node_columns(), L))
               : ad::relu(ad::add_scalar(
                     ad::scale(ad::col_mix(ad::col_mix(accumulated, plan.sum_over_aps),
                                           plan.spread_over_aps),
                               -1.0),
                     L));
    Var features = ad::concat_rows(ad::concat_rows(gains, gap), user_gap);
    for (int i = 0; i < config.layers; ++i) {
      if (mode == ForwardMode::Reference) {
        const Var sender = ad::gather_cols(features, plan.edge_source);
        const Var message =
            pe_unit_forward(tape, params, phi[i], ad::concat_rows(sender, edge_features), K);
        const Var aggregated = ad::col_mix(message, plan.aggregate);
        features =
            pe_unit_forward(tape, params, gamma[i], ad::concat_rows(features, aggregated), K);
      } else {
        const Var message = ad::pe_unit(weights(phi[i]), features, K, /*linear_out=*/false,
                                        plan.edge_source, &edge_features);
        const Var aggregated = ad::col_mix(message, plan.aggregate);
        features = ad::pe_unit(weights(gamma[i]), ad::concat_rows(features, aggregated), K,
                               /*linear_out=*/false);
      }
    }
    const Var logits = mode == ForwardMode::Reference
                           ? pe_unit_forward(tape, params, head, features, K, /*linear_out=*/true)
                           : ad::pe_unit(weights(head), features, K, /*linear_out=*/true);
    const Var s = ad::softmax_groups(logits, K);
    out.runs.push_back(s);
    accumulated = u == 0 ? s : ad::add(accumulated, s);
    const Var miss = ad::add_scalar(ad::scale(s, -1.0), 1.0);
    missed = u == 0 ? miss : ad::mul(missed, miss);
  }
  out.combined = ad::add_scalar(ad::scale(missed, -1.0), 1.0);
  return out;
}

Assignment recurrent_assign(const ad::ParamStore& params, const ModelConfig& config,
                            const Eigen::MatrixXd& gains, const GraphTopology& topology, int runs,
                            int min_serving_aps, double noise_power,
                            const InputNormalization& norm) {
  if (gains.cols() != topology.n_nodes) throw DimensionError("gain columns != topology nodes");
  const int K = static_cast<int>(gains.rows());
  const int N = topology.n_nodes;
  const BatchPlan plan = make_batch_plan(topology, K, 1);
  Tape tape;
  const auto outputs = forward_runs(tape, params, config, plan,
                                    normalize_gains(pack_gains({&gains}), noise_power, norm), runs,
                                    min_serving_aps);
  Assignment a;
  for (const auto& r : outputs.runs) a.runs.push_back(unpack_sample(r.value(), 0, N, K));
  a.combined = unpack_sample(outputs.combined.value(), 0, N, K);
  return a;
}

FronthaulBytes fronthaul_bytes(const GraphTopology& topology, const ModelConfig& config,
                               int n_users, int runs) {
  const std::uint64_t edges = topology.edges.size();
  const std::uint64_t per_value = sizeof(double);
  FronthaulBytes bytes;
  std::uint64_t width = kInputFeatures;
  for (int i = 0; i < config.layers; ++i) {
    const std::uint64_t message = edges * config.message_width * n_users * per_value;
    const std::uint64_t receiver_feature = edges * width * n_users * per_value;
    bytes.local += message * runs;
    bytes.generic += (message + receiver_feature) * runs;
    width = config.hidden_width;
  }
  return bytes;
}

}  // namespace cfa
