#pragma once

// The AP-user assignment problem on plain matrices. S and G are K x N
// (row = user, column = AP).

#include <vector>

#include <Eigen/Dense>

namespace cfa {

/// f = sum_k log2(1 + sum_n g_kn s_kn / sigma2).
double sum_rate(const Eigen::MatrixXd& gains, const Eigen::MatrixXd& assignment, double noise_power);

struct ConnectionViolation {
  /// ReLU(L - sum_n s_kn) per user.
  Eigen::VectorXd per_user;
  double total = 0.0;
  double total_squared = 0.0;
};

ConnectionViolation connection_violation(const Eigen::MatrixXd& assignment, int min_serving_aps);

struct DiscretenessPenalty {
  /// p_n = sum_u -sum_k s_kn^(u) ln s_kn^(u).
  Eigen::VectorXd per_ap;
  double total = 0.0;
};

/// Entropy of every per-run column, summed over runs; 0 ln 0 = 0.
DiscretenessPenalty discreteness_penalty(const std::vector<Eigen::MatrixXd>& runs);

/// Per run and AP the argmax user (lowest index on ties) is selected; the
/// binary s_kn is 1 iff (k, n) was selected in any run.
Eigen::MatrixXd binarize(const std::vector<Eigen::MatrixXd>& runs);

struct ConstraintCheck {
  bool binary = true;
  bool upper = true;  // sum_k s_kn <= U
  bool lower = true;  // sum_n s_kn >= L

  bool feasible() const { return binary && upper && lower; }
};

ConstraintCheck check_constraints(const Eigen::MatrixXd& assignment, int max_served_users,
                                  int min_serving_aps);

}  // namespace cfa
