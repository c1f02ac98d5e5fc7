#include "acceptance/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace cfa::oracle {

double sum_rate(const Eigen::MatrixXd& gains, const Eigen::MatrixXd& s, double noise_power) {
  double total = 0.0;
  for (int k = 0; k < gains.rows(); ++k) {
    double received = 0.0;
    for (int n = 0; n < gains.cols(); ++n) received += gains(k, n) * s(k, n);
    total += std::log2(1.0 + received / noise_power);
  }
  return total;
}

BruteForce brute_force(const Eigen::MatrixXd& gains, int max_served_users, int min_serving_aps,
                       double noise_power, bool require_lower) {
  const int K = static_cast<int>(gains.rows());
  const int N = static_cast<int>(gains.cols());
  if (K * N > 20) throw std::invalid_argument("brute_force: instance too large");
  BruteForce out;
  out.rate = -1.0;
  Eigen::MatrixXd s(K, N);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (K * N)); ++mask) {
    for (int k = 0; k < K; ++k) {
      for (int n = 0; n < N; ++n) s(k, n) = (mask >> (k * N + n)) & 1u;
    }
    bool columns_ok = true;
    for (int n = 0; n < N; ++n) columns_ok &= s.col(n).sum() == max_served_users;
    if (!columns_ok) continue;
    ++out.exact_u_count;
    if (require_lower) {
      bool rows_ok = true;
      for (int k = 0; k < K; ++k) rows_ok &= s.row(k).sum() >= min_serving_aps;
      if (!rows_ok) continue;
    }
    const double r = sum_rate(gains, s, noise_power);
    if (r > out.rate) {
      out.rate = r;
      out.best = s;
    }
  }
  return out;
}

Traffic traffic(std::uint64_t directed_edges, const std::vector<int>& layer_input_widths,
                int message_width, int n_users, int runs) {
  Traffic t;
  for (int width : layer_input_widths) {
    t.local += directed_edges * runs * n_users * message_width * 8;
    t.generic += directed_edges * runs * n_users * (message_width + width) * 8;
  }
  return t;
}

std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace cfa::oracle
