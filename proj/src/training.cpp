#include "cfassign/training.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cfassign/errors.hpp"
#include "text_io.hpp"

namespace cfa {

using ad::Matrix;
using ad::Tape;
using ad::Var;

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Unconstrained:
      return "unconstrained";
    case Phase::Connection:
      return "connection";
    case Phase::Discreteness:
      return "discreteness";
    case Phase::Done:
      return "done";
  }
  return "unknown";
}

Phase phase_from_string(const std::string& text) {
  if (text == "unconstrained") return Phase::Unconstrained;
  if (text == "connection") return Phase::Connection;
  if (text == "discreteness") return Phase::Discreteness;
  if (text == "done") return Phase::Done;
  throw SchemaError("unknown phase '" + text + "'");
}

void AlmState::advance(Phase next) {
  if (static_cast<int>(next) < static_cast<int>(phase)) {
    throw PhaseError("phase cannot move from " + to_string(phase) + " back to " + to_string(next));
  }
  phase = next;
}

double alm_objective(double f, double conn_total, double conn_sq_total, const Eigen::VectorXd& p,
                     const AlmState& alm) {
  return f - alm.lambda1 * conn_total - 0.5 * alm.lambda2 * p.sum() - alm.nu1 * conn_sq_total -
         0.5 * alm.nu2 * p.squaredNorm();
}

AlmState multiplier_update(AlmState alm, double conn_total, double p_total, Phase which) {
  if (which != alm.phase) {
    throw PhaseError("multiplier update for " + to_string(which) + " during phase " +
                     to_string(alm.phase));
  }
  if (which == Phase::Connection) {
    alm.lambda1 += alm.nu1 * conn_total;
    alm.nu1 += alm.delta_nu;
  } else if (which == Phase::Discreteness) {
    alm.lambda2 += alm.nu2 * p_total;
    alm.nu2 += alm.delta_nu;
  } else {
    throw PhaseError("no multipliers to update in phase " + to_string(which));
  }
  return alm;
}

BatchObjective batch_objective(Tape& tape, const RunOutputs& outputs, const BatchPlan& plan,
                               const Matrix& packed_gains, double noise_power,
                               int min_serving_aps, const AlmState& alm) {
  const double inv_batch = 1.0 / plan.batch;
  const Var& s = outputs.combined;
  BatchObjective obj;

  const Var received = ad::col_mix(ad::mul(s, tape.constant(packed_gains)), plan.sum_over_aps);
  const Var rates = ad::log(ad::add_scalar(ad::scale(received, 1.0 / noise_power), 1.0));
  obj.f = ad::scale(ad::sum(rates), inv_batch / std::numbers::ln2);

  const Var served = ad::col_mix(s, plan.sum_over_aps);
  const Var deficit = ad::relu(ad::add_scalar(ad::scale(served, -1.0), min_serving_aps));
  obj.conn = ad::scale(ad::sum(deficit), inv_batch);
  obj.conn_sq = ad::scale(ad::sum(ad::square(deficit)), inv_batch);

  Var p;
  for (std::size_t u = 0; u < outputs.runs.size(); ++u) {
    const Var h = ad::col_mix(ad::scale(ad::xlogx(outputs.runs[u]), -1.0), plan.sum_over_users);
    p = u == 0 ? h : ad::add(p, h);
  }
  obj.p_sum = ad::scale(ad::sum(p), inv_batch);
  obj.p_sq = ad::scale(ad::sum(ad::square(p)), inv_batch);

  Var g = obj.f;
  if (alm.lambda1 != 0.0) g = ad::sub(g, ad::scale(obj.conn, alm.lambda1));
  if (alm.lambda2 != 0.0) g = ad::sub(g, ad::scale(obj.p_sum, 0.5 * alm.lambda2));
  if (alm.nu1 != 0.0) g = ad::sub(g, ad::scale(obj.conn_sq, alm.nu1));
  if (alm.nu2 != 0.0) g = ad::sub(g, ad::scale(obj.p_sq, 0.5 * alm.nu2));
  obj.g = g;
  return obj;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || batch_size < 1 || convergence_window < 1 ||
      !(convergence_tol > 0.0) || max_inner_iters < 1 || max_outer_iters < 1 ||
      !(delta_nu > 0.0) || !(violation_tol > 0.0) || !(entropy_tol > 0.0) ||
      eval_batch_size < 1 || test_every < 1 || eval_chunk < 1) {
    throw Error("training configuration values must be positive");
  }
}

// ---------------------------------------------------------------------------
// Metrics

void Metrics::append(const MetricsRecord& record) {
  if (!records_.empty() && record.iteration <= records_.back().iteration) {
    throw Error("metrics iterations must increase");
  }
  records_.push_back(record);
}

const std::vector<std::string>& Metrics::csv_columns() {
  static const std::vector<std::string> columns = {
      "iteration", "phase",  "lambda1",  "lambda2",  "nu1",           "nu2",
      "train_f",   "test_f", "conn_pen", "disc_pen", "test_conn_pen", "test_disc_pen"};
  return columns;
}

void Metrics::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : records_) {
    out << r.iteration << ',' << to_string(r.phase);
    for (double v : {r.lambda1, r.lambda2, r.nu1, r.nu2, r.train_f, r.test_f, r.conn_pen,
                     r.disc_pen, r.test_conn_pen, r.test_disc_pen}) {
      out << ',' << text::format_double(v);
    }
    out << '\n';
  }
}

Metrics Metrics::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty metrics file");
  const auto header = text::split(line, ',');
  if (header != csv_columns()) throw SchemaError("unexpected metrics header: " + line);
  Metrics m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != header.size()) throw SchemaError("malformed metrics row: " + line);
    MetricsRecord r;
    r.iteration = text::parse_int<std::int64_t>(f[0]);
    r.phase = phase_from_string(f[1]);
    double* fields[] = {&r.lambda1, &r.lambda2, &r.nu1,      &r.nu2,           &r.train_f,
                        &r.test_f,  &r.conn_pen, &r.disc_pen, &r.test_conn_pen, &r.test_disc_pen};
    for (std::size_t i = 0; i < 10; ++i) *fields[i] = text::parse_double(f[i + 2]);
    m.append(r);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  const auto& mc = ckpt.model.config;
  out << "cfassign-checkpoint\n";
  out << "version=" << kModelCheckpointVersion << '\n';
  out << "layers=" << mc.layers << '\n';
  out << "hidden_width=" << mc.hidden_width << '\n';
  out << "message_width=" << mc.message_width << '\n';
  out << "topology=" << to_string(mc.topology) << '\n';
  out << "norm_mean=" << text::format_double(ckpt.model.norm.mean) << '\n';
  out << "norm_stddev=" << text::format_double(ckpt.model.norm.stddev) << '\n';
  ad::write_params(out, ckpt.model.params);
  out << "training=" << (ckpt.train ? 1 : 0) << '\n';
  if (ckpt.train) {
    const auto& t = *ckpt.train;
    out << "phase=" << to_string(t.alm.phase) << '\n';
    out << "lambda1=" << text::format_double(t.alm.lambda1) << '\n';
    out << "lambda2=" << text::format_double(t.alm.lambda2) << '\n';
    out << "nu1=" << text::format_double(t.alm.nu1) << '\n';
    out << "nu2=" << text::format_double(t.alm.nu2) << '\n';
    out << "delta_nu=" << text::format_double(t.alm.delta_nu) << '\n';
    out << "next_iteration=" << t.next_iteration << '\n';
    out << "rng=" << t.rng_state << '\n';
    ad::write_adam(out, t.adam);
  }
  out << "end\n";
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "cfassign-checkpoint") {
    throw SchemaError("'" + path.string() + "' is not a checkpoint");
  }
  const int version = text::parse_int<int>(text::expect_key(in, "version"));
  if (version != kModelCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " unsupported");
  }
  Checkpoint ckpt;
  auto& mc = ckpt.model.config;
  mc.layers = text::parse_int<int>(text::expect_key(in, "layers"));
  mc.hidden_width = text::parse_int<int>(text::expect_key(in, "hidden_width"));
  mc.message_width = text::parse_int<int>(text::expect_key(in, "message_width"));
  mc.topology = topology_from_string(text::expect_key(in, "topology"));
  ckpt.model.norm.mean = text::parse_double(text::expect_key(in, "norm_mean"));
  ckpt.model.norm.stddev = text::parse_double(text::expect_key(in, "norm_stddev"));
  ckpt.model.params = ad::read_params(in);
  if (!ckpt.model.params.same_layout(init_params(mc, 0))) {
    throw SchemaError("checkpoint tensors do not match the model configuration");
  }
  if (text::expect_key(in, "training") == "1") {
    TrainState t;
    t.alm.phase = phase_from_string(text::expect_key(in, "phase"));
    t.alm.lambda1 = text::parse_double(text::expect_key(in, "lambda1"));
    t.alm.lambda2 = text::parse_double(text::expect_key(in, "lambda2"));
    t.alm.nu1 = text::parse_double(text::expect_key(in, "nu1"));
    t.alm.nu2 = text::parse_double(text::expect_key(in, "nu2"));
    t.alm.delta_nu = text::parse_double(text::expect_key(in, "delta_nu"));
    t.next_iteration = text::parse_int<std::int64_t>(text::expect_key(in, "next_iteration"));
    t.rng_state = text::expect_key(in, "rng");
    t.adam = ad::read_adam(in);
    ckpt.train = std::move(t);
  }
  if (!std::getline(in, line) || line != "end") throw SchemaError("missing end marker");
  return ckpt;
}

// ---------------------------------------------------------------------------
// Packed datasets and chunked evaluation

namespace {

/// A dataset flattened into node-column order with its normalized copy.
struct PackedSet {
  int samples = 0;
  int block = 0;  // N * K columns per sample
  Matrix raw;
  Matrix normalized;

  PackedSet(const Dataset& ds, const InputNormalization& norm) {
    samples = static_cast<int>(ds.samples.size());
    block = ds.scenario.n_aps * ds.scenario.n_users;
    std::vector<const Eigen::MatrixXd*> ptrs;
    ptrs.reserve(ds.samples.size());
    for (const auto& s : ds.samples) ptrs.push_back(&s.gains);
    raw = pack_gains(ptrs);
    normalized = normalize_gains(raw, ds.scenario.noise_power, norm);
  }

  /// Columns of the listed samples, in order.
  std::pair<Matrix, Matrix> gather(const std::vector<int>& idx) const {
    Matrix r(1, static_cast<Eigen::Index>(idx.size()) * block);
    Matrix z(1, r.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      r.middleCols(i * block, block) = raw.middleCols(static_cast<Eigen::Index>(idx[i]) * block, block);
      z.middleCols(i * block, block) =
          normalized.middleCols(static_cast<Eigen::Index>(idx[i]) * block, block);
    }
    return {std::move(r), std::move(z)};
  }

  std::pair<Matrix, Matrix> range(int first, int count) const {
    return {raw.middleCols(static_cast<Eigen::Index>(first) * block, count * block),
            normalized.middleCols(static_cast<Eigen::Index>(first) * block, count * block)};
  }
};

class PlanCache {
 public:
  PlanCache(const GraphTopology& topology, int n_users) : topology_(topology), n_users_(n_users) {}

  const BatchPlan& get(int batch) {
    auto it = plans_.find(batch);
    if (it == plans_.end()) it = plans_.emplace(batch, make_batch_plan(topology_, n_users_, batch)).first;
    return it->second;
  }

 private:
  const GraphTopology& topology_;
  int n_users_;
  std::map<int, BatchPlan> plans_;
};

struct RelaxedStats {
  double f = 0.0;
  double conn = 0.0;
  double p_sum = 0.0;
};

/// Means of the relaxed terms over samples [0, count) of `set`.
RelaxedStats relaxed_stats(const Model& model, const PackedSet& set, int count, PlanCache& plans,
                           const Scenario& scenario, int chunk) {
  RelaxedStats total;
  for (int first = 0; first < count; first += chunk) {
    const int n = std::min(chunk, count - first);
    const BatchPlan& plan = plans.get(n);
    auto [raw, normalized] = set.range(first, n);
    Tape tape;
    const auto outputs = forward_runs(tape, model.params, model.config, plan, normalized,
                                      scenario.max_served_users, scenario.min_serving_aps);
    const auto obj = batch_objective(tape, outputs, plan, raw, scenario.noise_power,
                                     scenario.min_serving_aps, AlmState{});
    total.f += obj.f.scalar() * n;
    total.conn += obj.conn.scalar() * n;
    total.p_sum += obj.p_sum.scalar() * n;
  }
  total.f /= count;
  total.conn /= count;
  total.p_sum /= count;
  return total;
}

void require_finite(double value, const char* what, std::int64_t iteration) {
  if (!std::isfinite(value)) {
    throw NumericsError(std::string("non-finite ") + what + " at iteration " +
                        std::to_string(iteration));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Training loop

TrainResult train(const Dataset& train_set, const Dataset& test_set, const ModelConfig& model_config,
                  const TrainConfig& config, const TrainHooks& hooks, const Checkpoint* resume) {
  config.validate();
  if (!(train_set.scenario == test_set.scenario)) {
    throw Error("training and test sets must share one scenario");
  }
  if (train_set.samples.empty() || test_set.samples.empty()) throw Error("empty dataset");
  const Scenario& scenario = train_set.scenario;
  const int U = scenario.max_served_users;
  const int L = scenario.min_serving_aps;

  TrainResult result;
  Model& model = result.model;
  AlmState& alm = result.alm;
  ad::AdamState adam;
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::int64_t iteration = 0;

  if (resume) {
    if (!resume->train) throw Error("checkpoint carries no training state");
    if (!(resume->model.config == model_config)) throw Error("checkpoint model config differs");
    model = resume->model;
    alm = resume->train->alm;
    adam = resume->train->adam;
    std::istringstream(resume->train->rng_state) >> rng;
    iteration = resume->train->next_iteration;
  } else {
    model.config = model_config;
    model.params = init_params(model_config, config.seed);
    model.norm = fit_normalization(train_set);
    alm.delta_nu = config.delta_nu;
  }

  const GraphTopology topology = build_graph(scenario, model.config.topology);
  PlanCache plans(topology, scenario.n_users);
  const PackedSet train_packed(train_set, model.norm);
  const PackedSet test_packed(test_set, model.norm);
  const int batch = std::min(config.batch_size, train_packed.samples);
  const int held_in = std::min(config.eval_batch_size, train_packed.samples);
  const ad::AdamConfig adam_config{config.learning_rate};

  auto snapshot = [&]() {
    if (!hooks.on_checkpoint) return;
    Checkpoint c;
    c.model = model;
    TrainState t;
    t.alm = alm;
    t.adam = adam;
    std::ostringstream rs;
    rs << rng;
    t.rng_state = rs.str();
    t.next_iteration = iteration;
    c.train = std::move(t);
    hooks.on_checkpoint(c);
  };

  std::vector<int> pool(train_packed.samples);
  RelaxedStats last_test{};

  // One ascent step on a fresh batch; returns the batch objective.
  auto step = [&]() -> double {
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < batch; ++i) {
      std::uniform_int_distribution<int> pick(i, train_packed.samples - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    const std::vector<int> idx(pool.begin(), pool.begin() + batch);
    auto [raw, normalized] = train_packed.gather(idx);
    const BatchPlan& plan = plans.get(batch);

    Tape tape;
    const auto outputs = forward_runs(tape, model.params, model.config, plan, normalized, U, L);
    const auto obj =
        batch_objective(tape, outputs, plan, raw, scenario.noise_power, L, alm);
    const double g = obj.g.scalar();
    require_finite(g, "objective", iteration);
    const auto grads = tape.backward(obj.g, model.params);
    ad::adam_step(model.params, grads, adam, adam_config, /*maximize=*/true);

    MetricsRecord rec;
    rec.iteration = iteration;
    rec.phase = alm.phase;
    rec.lambda1 = alm.lambda1;
    rec.lambda2 = alm.lambda2;
    rec.nu1 = alm.nu1;
    rec.nu2 = alm.nu2;
    rec.train_f = obj.f.scalar();
    rec.conn_pen = obj.conn.scalar();
    rec.disc_pen = obj.p_sum.scalar();
    if (iteration % config.test_every == 0) {
      last_test = relaxed_stats(model, test_packed, test_packed.samples, plans, scenario,
                                config.eval_chunk);
      rec.test_f = last_test.f;
      rec.test_conn_pen = last_test.conn;
      rec.test_disc_pen = last_test.p_sum;
    } else {
      rec.test_f = rec.test_conn_pen = rec.test_disc_pen = std::numeric_limits<double>::quiet_NaN();
    }
    result.metrics.append(rec);
    if (hooks.on_record) hooks.on_record(rec);
    ++iteration;
    return g;
  };

  // Ascent until the windowed mean of g stops improving by convergence_tol
  // (relative), or max_inner_iters.
  auto inner_loop = [&]() {
    const int w = config.convergence_window;
    std::vector<double> history;
    history.reserve(config.max_inner_iters);
    for (int i = 0; i < config.max_inner_iters; ++i) {
      history.push_back(step());
      const int n = static_cast<int>(history.size());
      if (n >= 2 * w) {
        double recent = 0.0;
        double previous = 0.0;
        for (int j = n - w; j < n; ++j) recent += history[j];
        for (int j = n - 2 * w; j < n - w; ++j) previous += history[j];
        recent /= w;
        previous /= w;
        if (recent - previous < config.convergence_tol * std::max(std::abs(previous), 1e-12)) {
          return;
        }
      }
    }
  };

  auto held_in_stats = [&]() {
    return relaxed_stats(model, train_packed, held_in, plans, scenario, config.eval_chunk);
  };

  if (alm.phase == Phase::Unconstrained) {
    inner_loop();
    alm.advance(Phase::Connection);
    snapshot();
  }

  if (alm.phase == Phase::Connection) {
    bool done = false;
    for (int outer = 0; outer < config.max_outer_iters && !done; ++outer) {
      const auto before = held_in_stats();
      alm = multiplier_update(alm, before.conn, before.p_sum, Phase::Connection);
      inner_loop();
      done = held_in_stats().conn <= config.violation_tol;
    }
    result.connection_converged = done;
    alm.advance(Phase::Discreteness);
    snapshot();
  }

  if (alm.phase == Phase::Discreteness) {
    bool done = false;
    for (int outer = 0; outer < config.max_outer_iters && !done; ++outer) {
      const auto before = held_in_stats();
      alm = multiplier_update(alm, before.conn, before.p_sum, Phase::Discreteness);
      inner_loop();
      done = held_in_stats().p_sum <= config.entropy_tol;
    }
    result.discreteness_converged = done;
    alm.advance(Phase::Done);
    snapshot();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<Assignment> infer(const Model& model, const Dataset& dataset, int chunk) {
  if (chunk < 1) throw Error("chunk must be positive");
  const Scenario& scenario = dataset.scenario;
  const int N = scenario.n_aps;
  const int K = scenario.n_users;
  const GraphTopology topology = build_graph(scenario, model.config.topology);
  PlanCache plans(topology, K);
  const PackedSet packed(dataset, model.norm);
  std::vector<Assignment> out;
  out.reserve(packed.samples);
  for (int first = 0; first < packed.samples; first += chunk) {
    const int n = std::min(chunk, packed.samples - first);
    auto [raw, normalized] = packed.range(first, n);
    Tape tape;
    const auto outputs = forward_runs(tape, model.params, model.config, plans.get(n), normalized,
                                      scenario.max_served_users, scenario.min_serving_aps);
    for (int b = 0; b < n; ++b) {
      Assignment a;
      for (const auto& r : outputs.runs) a.runs.push_back(unpack_sample(r.value(), b, N, K));
      a.combined = unpack_sample(outputs.combined.value(), b, N, K);
      out.push_back(std::move(a));
    }
  }
  return out;
}

EvalSummary evaluate(const Model& model, const Dataset& dataset, int chunk) {
  const Scenario& scenario = dataset.scenario;
  const auto assignments = infer(model, dataset, chunk);
  EvalSummary s;
  s.samples = static_cast<int>(assignments.size());
  if (s.samples == 0) return s;
  long duplicates = 0;
  long feasible = 0;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto& a = assignments[i];
    const auto& g = dataset.samples[i].gains;
    s.relaxed_sum_rate += sum_rate(g, a.combined, scenario.noise_power);
    s.relaxed_connection_penalty += connection_violation(a.combined, scenario.min_serving_aps).total;
    const auto p = discreteness_penalty(a.runs);
    s.discreteness_penalty += p.total;
    s.mean_run_entropy += p.total / (static_cast<double>(a.runs.size()) * scenario.n_aps);

    const Eigen::MatrixXd binary = binarize(a.runs);
    const double rate = sum_rate(g, binary, scenario.noise_power);
    s.binary_rates.push_back(rate);
    s.binary_sum_rate += rate;
    const auto check = check_constraints(binary, scenario.max_served_users, scenario.min_serving_aps);
    if (!check.upper) ++s.upper_violations;
    if (!check.lower) ++s.lower_violations;
    if (check.feasible()) ++feasible;

    // distinct users per AP below the number of runs means a repeated pick
    for (Eigen::Index n = 0; n < binary.cols(); ++n) {
      if (binary.col(n).sum() < static_cast<double>(a.runs.size())) ++duplicates;
    }
  }
  const double count = s.samples;
  s.relaxed_sum_rate /= count;
  s.binary_sum_rate /= count;
  s.relaxed_connection_penalty /= count;
  s.discreteness_penalty /= count;
  s.mean_run_entropy /= count;
  s.feasible_fraction = feasible / count;
  s.duplicate_pick_rate = duplicates / (count * scenario.n_aps);
  return s;
}

}  // namespace cfa
