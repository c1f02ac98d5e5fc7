#pragma once

// Reverse-mode differentiation over small dense matrices.
//
// A Tape records every operation applied to its Vars; Tape::backward walks
// the record in reverse and accumulates gradients. Matrices are laid out as
// (features x columns); in the GNN the columns enumerate (sample, node, user)
// triples with the user index fastest, so "groups" of K consecutive columns
// share one (sample, node) pair.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace cfa::ad {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Named parameter matrices. Iteration is sorted by name, so every traversal
/// (update, checkpoint, finite differences) sees the same order.
class ParamStore {
 public:
  using Map = std::map<std::string, Matrix>;

  void add(const std::string& name, Matrix value);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;

  /// Same names and shapes, all zeros.
  ParamStore zeros_like() const;
  /// Total number of scalar entries.
  std::size_t scalar_count() const;
  bool same_layout(const ParamStore& other) const;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  bool operator==(const ParamStore& other) const;

 private:
  Map params_;
};

void write_params(std::ostream& out, const ParamStore& params);
ParamStore read_params(std::istream& in);

inline constexpr int kCheckpointSchemaVersion = 1;

/// Standalone parameter file: versioned header plus the named tensors.
void save_params(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_params(const std::filesystem::path& path);

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward =
      std::function<void(Tape&, const Matrix& out_value, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to `params[name]`. Repeated calls with the same name return
  /// the same node, so its gradient is accumulated once.
  Var param(const ParamStore& params, const std::string& name);

  /// Records an op result. `parents` decide whether the node needs a
  /// gradient; `backward` receives the node's value and gradient and must call
  /// accumulate() on the parents.
  Var record(Matrix value, std::vector<Var> parents, Backward backward);

  bool requires_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }
  void accumulate(const Var& v, const Matrix& grad);
  template <typename Expr>
  void accumulate_expr(const Var& v, const Expr& grad);

  /// Populates gradients of every node reachable from the scalar `root`
  /// and returns them for `params` in store order. Parameters the root does
  /// not depend on get zero gradients.
  ParamStore backward(const Var& root, const ParamStore& params);

  /// Gradient of an arbitrary node after backward(); zeros if none reached it.
  Matrix grad(const Var& v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Matrix value;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> param_nodes_;
};

template <typename Expr>
void Tape::accumulate_expr(const Var& v, const Expr& grad) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = grad;
    n.has_grad = true;
  } else {
    n.grad += grad;
  }
}

// -- primitives -------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product.
Var mul(const Var& a, const Var& b);
/// m + b for every column; b is rows x 1.
Var add_col_broadcast(const Var& m, const Var& b);
Var scale(const Var& m, double factor);
Var add_scalar(const Var& m, double value);
/// Subgradient 0 at the kink.
Var relu(const Var& m);
/// Natural log; every entry must be > 0.
Var log(const Var& m);
/// x * log(x + kEntropyEps); continuous at 0 with value 0.
Var xlogx(const Var& m);
Var square(const Var& m);
/// 1x1 sum of all entries.
Var sum(const Var& m);
Var concat_rows(const Var& top, const Var& bottom);
/// Column j of the result is column (*index)[j] of m.
Var gather_cols(const Var& m, std::shared_ptr<const std::vector<int>> index);
/// m * mix, for a fixed sparse column-mixing matrix (cols(m) x out_cols).
Var col_mix(const Var& m, std::shared_ptr<const SparseMatrix> mix);
/// Mean over each group of `group` consecutive columns, broadcast back to
/// every column of the group. Same shape as m.
Var mean_over_users(const Var& m, int group);
/// Per row, softmax over each group of `group` consecutive columns.
Var softmax_groups(const Var& m, int group);

/// Weights of a two-branch PE unit; w1c/w1a are hidden x in, w2 is
/// out x 2*hidden, biases are columns.
struct PeWeights {
  Var w1c, b1c, w1a, b1a, w2, b2;
};

/// One node computing
///   c = relu(W1c x + b1c), a = mean_over_users(relu(W1a x + b1a), group),
///   y = W2 [c; a] + b2, then relu(y) unless linear_out,
/// where x is `input`, or [gather_cols(input, source); extra] when `source`
/// is given (extra then has one column per gathered column). The first layer
/// is applied before the gather.
Var pe_unit(const PeWeights& w, const Var& input, int group, bool linear_out,
            std::shared_ptr<const std::vector<int>> source = nullptr, const Var* extra = nullptr);

inline constexpr double kEntropyEps = 1e-12;

// -- optimization -----------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  ParamStore m;
  ParamStore v;
  std::int64_t t = 0;

  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update. With `maximize` the step ascends.
/// Throws NumericsError naming the parameter if a gradient is not finite.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state,
               const AdamConfig& config, bool maximize);

void write_adam(std::ostream& out, const AdamState& state);
AdamState read_adam(std::istream& in);

/// Central differences (f(p + h) - f(p - h)) / 2h, one coordinate at a time.
ParamStore finite_difference_gradient(const std::function<double(const ParamStore&)>& f,
                                      const ParamStore& params, double h);

/// Glorot-uniform weights (a = sqrt(6 / (fan_in + fan_out))); biases zero.
Matrix glorot_uniform(int rows, int cols, std::mt19937_64& rng);

}  // namespace cfa::ad
