#include "cfassign/problem.hpp"

#include <cmath>

#include "cfassign/errors.hpp"

namespace cfa {

double sum_rate(const Eigen::MatrixXd& gains, const Eigen::MatrixXd& assignment, double noise_power) {
  if (gains.rows() != assignment.rows() || gains.cols() != assignment.cols()) {
    throw DimensionError("sum_rate: gain and assignment shapes differ");
  }
  if ((gains.array() < 0.0).any()) throw Error("sum_rate: negative channel gain");
  const Eigen::VectorXd received = gains.cwiseProduct(assignment).rowwise().sum();
  double f = 0.0;
  for (Eigen::Index k = 0; k < received.size(); ++k) f += std::log2(1.0 + received[k] / noise_power);
  return f;
}

ConnectionViolation connection_violation(const Eigen::MatrixXd& assignment, int min_serving_aps) {
  ConnectionViolation v;
  v.per_user = (static_cast<double>(min_serving_aps) - assignment.rowwise().sum().array()).max(0.0);
  v.total = v.per_user.sum();
  v.total_squared = v.per_user.squaredNorm();
  return v;
}

DiscretenessPenalty discreteness_penalty(const std::vector<Eigen::MatrixXd>& runs) {
  DiscretenessPenalty p;
  if (runs.empty()) return p;
  p.per_ap = Eigen::VectorXd::Zero(runs.front().cols());
  for (const auto& s : runs) {
    if (s.cols() != p.per_ap.size()) throw DimensionError("discreteness_penalty: run shapes differ");
    if ((s.array() < 0.0).any() || (s.array() > 1.0).any()) {
      throw Error("discreteness_penalty: entries must lie in [0, 1]");
    }
    for (Eigen::Index n = 0; n < s.cols(); ++n) {
      double h = 0.0;
      for (Eigen::Index k = 0; k < s.rows(); ++k) {
        const double x = s(k, n);
        if (x > 0.0) h -= x * std::log(x);
      }
      p.per_ap[n] += h;
    }
  }
  p.total = p.per_ap.sum();
  return p;
}

Eigen::MatrixXd binarize(const std::vector<Eigen::MatrixXd>& runs) {
  if (runs.empty()) return {};
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(runs.front().rows(), runs.front().cols());
  for (const auto& s : runs) {
    for (Eigen::Index n = 0; n < s.cols(); ++n) {
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < s.rows(); ++k) {
        if (s(k, n) > s(best, n)) best = k;
      }
      out(best, n) = 1.0;
    }
  }
  return out;
}

ConstraintCheck check_constraints(const Eigen::MatrixXd& assignment, int max_served_users,
                                  int min_serving_aps) {
  ConstraintCheck c;
  c.binary = ((assignment.array() == 0.0) || (assignment.array() == 1.0)).all();
  c.upper = (assignment.colwise().sum().array() <= max_served_users).all();
  c.lower = (assignment.rowwise().sum().array() >= min_serving_aps).all();
  return c;
}

}  // namespace cfa
