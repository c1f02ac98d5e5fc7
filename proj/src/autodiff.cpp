#include "cfassign/autodiff.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <tuple>

#include "cfassign/errors.hpp"
#include "text_io.hpp"

namespace cfa::ad {

// ---------------------------------------------------------------------------
// ParamStore

void ParamStore::add(const std::string& name, Matrix value) {
  if (!params_.emplace(name, std::move(value)).second) {
    throw Error("duplicate parameter '" + name + "'");
  }
}

Matrix& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Matrix& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& [name, value] : params_) out.add(name, Matrix::Zero(value.rows(), value.cols()));
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, value] : params_) n += static_cast<std::size_t>(value.size());
  return n;
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto a = params_.begin();
  auto b = other.params_.begin();
  for (; a != params_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.rows() != b->second.rows() ||
        a->second.cols() != b->second.cols()) {
      return false;
    }
  }
  return true;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (!same_layout(other)) return false;
  auto b = other.params_.begin();
  for (auto a = params_.begin(); a != params_.end(); ++a, ++b) {
    if (a->second != b->second) return false;
  }
  return true;
}

void write_params(std::ostream& out, const ParamStore& params) {
  out << "tensors=" << params.size() << '\n';
  for (const auto& [name, value] : params) {
    out << "tensor " << name << ' ' << value.rows() << ' ' << value.cols() << '\n';
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        if (c) out << ' ';
        out << text::format_double(value(r, c));
      }
      out << '\n';
    }
  }
}

ParamStore read_params(std::istream& in) {
  const auto count = text::parse_int<std::size_t>(text::expect_key(in, "tensors"));
  ParamStore params;
  std::string line;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw SchemaError("truncated tensor list");
    const auto head = text::split_ws(line);
    if (head.size() != 4 || head[0] != "tensor") throw SchemaError("bad tensor header: " + line);
    const auto rows = text::parse_int<Eigen::Index>(head[2]);
    const auto cols = text::parse_int<Eigen::Index>(head[3]);
    Matrix value(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw SchemaError("truncated tensor '" + head[1] + "'");
      const auto toks = text::split_ws(line);
      if (static_cast<Eigen::Index>(toks.size()) != cols) {
        throw SchemaError("tensor '" + head[1] + "' row has wrong width");
      }
      for (Eigen::Index c = 0; c < cols; ++c) value(r, c) = text::parse_double(toks[c]);
    }
    params.add(head[1], std::move(value));
  }
  return params;
}

void save_params(const ParamStore& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "cfassign-params\nversion=" << kCheckpointSchemaVersion << '\n';
  write_params(out, params);
  out << "end\n";
}

ParamStore load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "cfassign-params") throw SchemaError("not a params file");
  const int version = text::parse_int<int>(text::expect_key(in, "version"));
  if (version != kCheckpointSchemaVersion) throw VersionError("unsupported params version");
  auto params = read_params(in);
  if (!std::getline(in, line) || line != "end") throw SchemaError("missing end marker");
  return params;
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape_->nodes_[id_].value; }

double Var::scalar() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw DimensionError("scalar() on a non-1x1 node");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const ParamStore& params, const std::string& name) {
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = params.at(name);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  param_nodes_[name] = nodes_.size() - 1;
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::vector<Var> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const auto& p : parents) {
    if (p.tape_ != this) throw Error("operands live on different tapes");
    n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(const Var& v, const Matrix& grad) { accumulate_expr(v, grad); }

ParamStore Tape::backward(const Var& root, const ParamStore& params) {
  if (root.tape_ != this) throw Error("root lives on a different tape");
  const auto& rv = nodes_[root.id_].value;
  if (rv.rows() != 1 || rv.cols() != 1) throw DimensionError("backward() needs a scalar root");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  if (nodes_[root.id_].requires_grad) {
    nodes_[root.id_].grad = Matrix::Ones(1, 1);
    nodes_[root.id_].has_grad = true;
  }
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, n.value, n.grad);
  }
  ParamStore grads = params.zeros_like();
  for (auto& [name, g] : grads) {
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end() && nodes_[it->second].has_grad) g = nodes_[it->second].grad;
  }
  return grads;
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id_];
  if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

// ---------------------------------------------------------------------------
// primitives

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

void require_groups(const Var& m, int group, const char* op) {
  if (group < 1 || m.cols() % group != 0) {
    throw DimensionError(std::string(op) + ": column count not a multiple of the group size");
  }
}

using Strided = Eigen::Map<Matrix, 0, Eigen::OuterStride<>>;
using ConstStrided = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;

// View of member k of every group: rows x (cols / group), stepping over the
// other group members.
ConstStrided member(const Matrix& m, int group, int k) {
  return ConstStrided(m.data() + k * m.rows(), m.rows(), m.cols() / group,
                      Eigen::OuterStride<>(m.rows() * group));
}

Strided member(Matrix& m, int group, int k) {
  return Strided(m.data() + k * m.rows(), m.rows(), m.cols() / group,
                 Eigen::OuterStride<>(m.rows() * group));
}

Matrix group_mean_broadcast(const Matrix& m, int group) {
  Matrix mean = Matrix::Zero(m.rows(), m.cols() / group);
  for (int k = 0; k < group; ++k) mean += member(m, group, k);
  mean /= static_cast<double>(group);
  Matrix out(m.rows(), m.cols());
  for (int k = 0; k < group; ++k) member(out, group, k) = mean;
  return out;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " differ");
  }
  return a.tape().record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate_expr(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate_expr(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate_expr(b, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b},
                         [a, b](Tape& t, const Matrix&, const Matrix& g) {
                           if (t.requires_grad(a)) t.accumulate_expr(a, g.cwiseProduct(b.value()));
                           if (t.requires_grad(b)) t.accumulate_expr(b, g.cwiseProduct(a.value()));
                         });
}

Var add_col_broadcast(const Var& m, const Var& b) {
  if (b.cols() != 1 || b.rows() != m.rows()) {
    throw DimensionError("add_col_broadcast: bias must be rows x 1");
  }
  Matrix value = m.value().colwise() + b.value().col(0);
  return m.tape().record(std::move(value), {m, b}, [m, b](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(m, g);
    if (t.requires_grad(b)) t.accumulate_expr(b, g.rowwise().sum());
  });
}

Var scale(const Var& m, double factor) {
  return m.tape().record(m.value() * factor, {m},
                         [m, factor](Tape& t, const Matrix&, const Matrix& g) { t.accumulate_expr(m, g * factor); });
}

Var add_scalar(const Var& m, double value) {
  return m.tape().record(m.value().array() + value, {m},
                         [m](Tape& t, const Matrix&, const Matrix& g) { t.accumulate(m, g); });
}

Var relu(const Var& m) {
  Matrix value = m.value().cwiseMax(0.0);
  return m.tape().record(std::move(value), {m}, [m](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate_expr(m, (m.value().array() > 0.0).select(g, 0.0));
  });
}

Var log(const Var& m) {
  if (!(m.value().array() > 0.0).all()) throw NumericsError("log of a non-positive entry");
  return m.tape().record(m.value().array().log().matrix(), {m}, [m](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate_expr(m, g.cwiseQuotient(m.value()));
  });
}

Var xlogx(const Var& m) {
  const auto shifted = (m.value().array() + kEntropyEps);
  Matrix value = (m.value().array() * shifted.log()).matrix();
  return m.tape().record(std::move(value), {m}, [m](Tape& t, const Matrix&, const Matrix& g) {
    const auto x = m.value().array();
    const auto xe = x + kEntropyEps;
    t.accumulate_expr(m, (g.array() * (xe.log() + x / xe)).matrix());
  });
}

Var square(const Var& m) {
  return m.tape().record(m.value().cwiseAbs2(), {m}, [m](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate_expr(m, 2.0 * g.cwiseProduct(m.value()));
  });
}

Var sum(const Var& m) {
  Matrix value(1, 1);
  value(0, 0) = m.value().sum();
  return m.tape().record(std::move(value), {m}, [m](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate_expr(m, Matrix::Constant(m.rows(), m.cols(), g(0, 0)));
  });
}

Var concat_rows(const Var& top, const Var& bottom) {
  if (top.cols() != bottom.cols()) throw DimensionError("concat_rows: column counts differ");
  Matrix value(top.rows() + bottom.rows(), top.cols());
  value.topRows(top.rows()) = top.value();
  value.bottomRows(bottom.rows()) = bottom.value();
  return top.tape().record(std::move(value), {top, bottom},
                           [top, bottom](Tape& t, const Matrix&, const Matrix& g) {
                             t.accumulate_expr(top, g.topRows(top.rows()));
                             t.accumulate_expr(bottom, g.bottomRows(bottom.rows()));
                           });
}

Var gather_cols(const Var& m, std::shared_ptr<const std::vector<int>> index) {
  const auto& src = m.value();
  Matrix value(src.rows(), static_cast<Eigen::Index>(index->size()));
  for (std::size_t j = 0; j < index->size(); ++j) {
    const int c = (*index)[j];
    if (c < 0 || c >= src.cols()) throw DimensionError("gather_cols: index out of range");
    value.col(static_cast<Eigen::Index>(j)) = src.col(c);
  }
  return m.tape().record(std::move(value), {m}, [m, index](Tape& t, const Matrix&, const Matrix& g) {
    Matrix gm = Matrix::Zero(m.rows(), m.cols());
    for (std::size_t j = 0; j < index->size(); ++j) gm.col((*index)[j]) += g.col(j);
    t.accumulate(m, gm);
  });
}

Var col_mix(const Var& m, std::shared_ptr<const SparseMatrix> mix) {
  if (mix->rows() != m.cols()) throw DimensionError("col_mix: mixing matrix rows != m.cols()");
  Matrix value = m.value() * (*mix);
  return m.tape().record(std::move(value), {m}, [m, mix](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate_expr(m, g * mix->transpose());
  });
}

Var mean_over_users(const Var& m, int group) {
  require_groups(m, group, "mean_over_users");
  // The operator is symmetric, so backward applies it to the gradient.
  return m.tape().record(group_mean_broadcast(m.value(), group), {m},
                         [m, group](Tape& t, const Matrix&, const Matrix& g) {
                           t.accumulate(m, group_mean_broadcast(g, group));
                         });
}

Var softmax_groups(const Var& m, int group) {
  require_groups(m, group, "softmax_groups");
  const Matrix& x = m.value();
  Matrix mx = member(x, group, 0);
  for (int k = 1; k < group; ++k) mx = mx.cwiseMax(Matrix(member(x, group, k)));
  Matrix value(x.rows(), x.cols());
  Matrix denom = Matrix::Zero(mx.rows(), mx.cols());
  for (int k = 0; k < group; ++k) {
    auto e = member(value, group, k);
    e = (member(x, group, k) - mx).array().exp().matrix();
    denom += e;
  }
  for (int k = 0; k < group; ++k) {
    auto e = member(value, group, k);
    e = e.cwiseQuotient(denom);
  }
  return m.tape().record(std::move(value), {m},
                         [m, group](Tape& t, const Matrix& s, const Matrix& g) {
                           // ds_k: s_k * (g_k - sum_j g_j s_j) within each group
                           Matrix dot = Matrix::Zero(s.rows(), s.cols() / group);
                           for (int k = 0; k < group; ++k) {
                             dot += member(g, group, k).cwiseProduct(member(s, group, k));
                           }
                           Matrix gx(s.rows(), s.cols());
                           for (int k = 0; k < group; ++k) {
                             member(gx, group, k) =
                                 member(s, group, k).cwiseProduct(member(g, group, k) - dot);
                           }
                           t.accumulate(m, gx);
                         });
}

namespace {

// Activations kept for the backward pass of pe_unit.
struct PeCache {
  Matrix c;     // relu(W1c x + b1c), hidden x cols
  Matrix a;     // relu(W1a x + b1a), hidden x cols
  Matrix mean;  // group mean of a, hidden x groups
};

void group_sum_into(const Matrix& m, int group, Matrix& out) {
  out.setZero(m.rows(), m.cols() / group);
  for (int k = 0; k < group; ++k) out += member(m, group, k);
}

}  // namespace

Var pe_unit(const PeWeights& w, const Var& input, int group, bool linear_out,
            std::shared_ptr<const std::vector<int>> source, const Var* extra) {
  const Matrix& x = input.value();
  const Eigen::Index hidden = w.w1c.rows();
  const Eigen::Index dx = x.rows();
  const Eigen::Index de = extra ? extra->rows() : 0;
  const Eigen::Index cols = source ? static_cast<Eigen::Index>(source->size()) : x.cols();
  if (w.w1c.cols() != dx + de || w.w1a.rows() != hidden || w.w1a.cols() != dx + de ||
      w.b1c.rows() != hidden || w.b1a.rows() != hidden || w.b1c.cols() != 1 ||
      w.b1a.cols() != 1 || w.w2.cols() != 2 * hidden || w.b2.rows() != w.w2.rows() ||
      w.b2.cols() != 1) {
    throw DimensionError("pe_unit: weight shapes do not fit the input");
  }
  if (extra && !source) throw DimensionError("pe_unit: extra rows need a gather index");
  if (extra && extra->cols() != cols) throw DimensionError("pe_unit: extra column count");
  if (group < 1 || cols % group != 0) {
    throw DimensionError("pe_unit: column count not a multiple of the group size");
  }
  if (source) {
    for (int c : *source) {
      if (c < 0 || c >= x.cols()) throw DimensionError("pe_unit: gather index out of range");
    }
  }

  auto cache = std::make_shared<PeCache>();
  auto first_layer = [&](const Var& wv, const Var& bv, Matrix& out) {
    const Matrix& wm = wv.value();
    if (source) {
      const Matrix projected = wm.leftCols(dx) * x;
      out.resize(hidden, cols);
      for (Eigen::Index j = 0; j < cols; ++j) out.col(j) = projected.col((*source)[j]);
      if (extra) out.noalias() += wm.rightCols(de) * extra->value();
    } else {
      out.noalias() = wm * x;
    }
    out.colwise() += bv.value().col(0);
    out = out.cwiseMax(0.0);
  };
  first_layer(w.w1c, w.b1c, cache->c);
  first_layer(w.w1a, w.b1a, cache->a);
  group_sum_into(cache->a, group, cache->mean);
  cache->mean /= static_cast<double>(group);

  const Matrix& w2 = w.w2.value();
  Matrix y = w2.leftCols(hidden) * cache->c;
  const Matrix shared = w2.rightCols(hidden) * cache->mean;
  for (int k = 0; k < group; ++k) member(y, group, k) += shared;
  y.colwise() += w.b2.value().col(0);
  if (!linear_out) y = y.cwiseMax(0.0);

  std::vector<Var> parents = {input, w.w1c, w.b1c, w.w1a, w.b1a, w.w2, w.b2};
  const Var extra_var = extra ? *extra : Var();
  if (extra) parents.push_back(*extra);
  return input.tape().record(
      std::move(y), std::move(parents),
      [=](Tape& t, const Matrix& out, const Matrix& grad) {
        const Matrix gy = linear_out ? grad : Matrix((out.array() > 0.0).select(grad, 0.0));
        Matrix gy_groups;
        group_sum_into(gy, group, gy_groups);
        const Matrix& w2v = w.w2.value();
        if (t.requires_grad(w.b2)) t.accumulate_expr(w.b2, gy.rowwise().sum());
        if (t.requires_grad(w.w2)) {
          Matrix gw2(w2v.rows(), w2v.cols());
          gw2.leftCols(hidden).noalias() = gy * cache->c.transpose();
          gw2.rightCols(hidden).noalias() = gy_groups * cache->mean.transpose();
          t.accumulate(w.w2, gw2);
        }

        Matrix gc = w2v.leftCols(hidden).transpose() * gy;
        gc = (cache->c.array() > 0.0).select(gc, 0.0);
        const Matrix gmean = (w2v.rightCols(hidden).transpose() * gy_groups) / static_cast<double>(group);
        Matrix ga(hidden, cols);
        for (int k = 0; k < group; ++k) member(ga, group, k) = gmean;
        ga = (cache->a.array() > 0.0).select(ga, 0.0);
        if (t.requires_grad(w.b1c)) t.accumulate_expr(w.b1c, gc.rowwise().sum());
        if (t.requires_grad(w.b1a)) t.accumulate_expr(w.b1a, ga.rowwise().sum());

        const Matrix& xv = input.value();
        // gradients with respect to the pre-gather projection
        auto scatter = [&](const Matrix& g) {
          if (!source) return g;
          Matrix s = Matrix::Zero(hidden, xv.cols());
          for (Eigen::Index j = 0; j < cols; ++j) s.col((*source)[j]) += g.col(j);
          return s;
        };
        const Matrix pc = scatter(gc);
        const Matrix pa = scatter(ga);
        for (auto [wv, gz, pz] : {std::tuple{w.w1c, &gc, &pc}, std::tuple{w.w1a, &ga, &pa}}) {
          if (!t.requires_grad(wv)) continue;
          Matrix gw(hidden, dx + de);
          gw.leftCols(dx).noalias() = *pz * xv.transpose();
          if (de > 0) gw.rightCols(de).noalias() = *gz * extra_var.value().transpose();
          t.accumulate(wv, gw);
        }
        if (t.requires_grad(input)) {
          Matrix gx = w.w1c.value().leftCols(dx).transpose() * pc;
          gx.noalias() += w.w1a.value().leftCols(dx).transpose() * pa;
          t.accumulate(input, gx);
        }
        if (de > 0 && t.requires_grad(extra_var)) {
          Matrix ge = w.w1c.value().rightCols(de).transpose() * gc;
          ge.noalias() += w.w1a.value().rightCols(de).transpose() * ga;
          t.accumulate(extra_var, ge);
        }
      });
}

// ---------------------------------------------------------------------------
// Adam, finite differences, initialization

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state,
               const AdamConfig& config, bool maximize) {
  if (!params.same_layout(grads)) throw DimensionError("adam_step: gradient layout mismatch");
  for (const auto& [name, g] : grads) {
    if (!g.allFinite()) throw NumericsError("non-finite gradient for parameter '" + name + "'");
  }
  if (state.m.size() == 0) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  } else if (!params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw DimensionError("adam_step: moment layout mismatch");
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  const double direction = maximize ? 1.0 : -1.0;
  for (auto& [name, p] : params) {
    const Matrix& g = grads.at(name);
    Matrix& m = state.m.at(name);
    Matrix& v = state.v.at(name);
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseAbs2();
    const auto mhat = m.array() / bc1;
    const auto vhat = v.array() / bc2;
    p.array() += direction * config.learning_rate * mhat / (vhat.sqrt() + config.epsilon);
  }
}

void write_adam(std::ostream& out, const AdamState& state) {
  out << "adam_t=" << state.t << '\n';
  write_params(out, state.m);
  write_params(out, state.v);
}

AdamState read_adam(std::istream& in) {
  AdamState state;
  state.t = text::parse_int<std::int64_t>(text::expect_key(in, "adam_t"));
  state.m = read_params(in);
  state.v = read_params(in);
  return state;
}

ParamStore finite_difference_gradient(const std::function<double(const ParamStore&)>& f,
                                      const ParamStore& params, double h) {
  if (!(h > 0.0)) throw Error("finite difference step must be positive");
  ParamStore grads = params.zeros_like();
  ParamStore probe = params;
  for (auto& [name, g] : grads) {
    Matrix& p = probe.at(name);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double orig = p.data()[i];
      p.data()[i] = orig + h;
      const double up = f(probe);
      p.data()[i] = orig - h;
      const double down = f(probe);
      p.data()[i] = orig;
      g.data()[i] = (up - down) / (2.0 * h);
    }
  }
  return grads;
}

Matrix glorot_uniform(int rows, int cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix w(rows, cols);
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
  }
  return w;
}

}  // namespace cfa::ad
