#pragma once

// Reference assignment methods: exhaustive enumeration, uniformly random
// feasible assignment, and greedy serial dictatorship (GSD).

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "cfassign/scenario.hpp"

namespace cfa {

struct AssignmentResult {
  /// Binary K x N; empty when `available` is false.
  Eigen::MatrixXd S;
  double sum_rate = 0.0;
  bool feasible = false;
  /// Assignments visited (exhaustive only).
  std::uint64_t enumerated_count = 0;
  /// (K choose U)^N, also reported when over budget.
  double search_space = 0.0;
  /// False when the enumeration budget was exceeded.
  bool available = true;
};

inline constexpr std::uint64_t kDefaultEnumerationBudget = 10'000'000;
inline constexpr const char* kGsdVariant = "user_dictator_v1";

/// Throws InfeasibleError unless U <= K, L <= N and K * L <= N * U.
void require_feasible_shape(int n_users, int n_aps, int max_served_users, int min_serving_aps);

/// (K choose U)^N as a double.
double assignment_space_size(int n_users, int n_aps, int max_served_users);

/// Every AP picks exactly U users; APs vary outer-to-inner by index and
/// subsets in lexicographic order; the first maximum is kept.
AssignmentResult exhaustive(const Eigen::MatrixXd& gains, int max_served_users, int min_serving_aps,
                            double noise_power, bool require_lower = true,
                            std::uint64_t budget = kDefaultEnumerationBudget);

/// Uniform U-subsets per AP, redrawn until every user has L APs (at most
/// `max_redraws` times), then repaired by single-slot reassignment.
AssignmentResult random_assignment(const Eigen::MatrixXd& gains, int max_served_users,
                                   int min_serving_aps, double noise_power, Rng& rng,
                                   int max_redraws = 1000);

/// Users ordered by best gain claim their L best APs with free capacity;
/// remaining capacity goes to the largest unassigned gains.
AssignmentResult gsd(const Eigen::MatrixXd& gains, int max_served_users, int min_serving_aps,
                     double noise_power);

}  // namespace cfa
