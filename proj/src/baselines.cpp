#include "cfassign/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cfassign/errors.hpp"
#include "cfassign/problem.hpp"

namespace cfa {

namespace {

/// All size-u subsets of {0..k-1} in lexicographic order.
std::vector<std::vector<int>> subsets(int k, int u) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(u);
  std::iota(cur.begin(), cur.end(), 0);
  while (true) {
    out.push_back(cur);
    int i = u - 1;
    while (i >= 0 && cur[i] == k - u + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < u; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

AssignmentResult finish(Eigen::MatrixXd S, const Eigen::MatrixXd& gains, int U, int L,
                        double noise_power) {
  AssignmentResult r;
  r.sum_rate = sum_rate(gains, S, noise_power);
  r.feasible = check_constraints(S, U, L).feasible();
  r.S = std::move(S);
  return r;
}

/// Reassigns single AP slots from users above L to users below L. Returns
/// false if some deficient user has no admissible move.
bool repair_lower(Eigen::MatrixXd& S, const Eigen::MatrixXd& gains, int L) {
  const Eigen::Index K = S.rows();
  const Eigen::Index N = S.cols();
  Eigen::VectorXd count = S.rowwise().sum();
  for (Eigen::Index k = 0; k < K; ++k) {
    while (count[k] < L) {
      Eigen::Index best_n = -1;
      Eigen::Index best_j = -1;
      for (Eigen::Index n = 0; n < N; ++n) {
        if (S(k, n) != 0.0) continue;
        if (best_n >= 0 && gains(k, n) <= gains(k, best_n)) continue;
        Eigen::Index victim = -1;
        for (Eigen::Index j = 0; j < K; ++j) {
          if (S(j, n) == 0.0 || count[j] <= L) continue;
          if (victim < 0 || gains(j, n) < gains(victim, n)) victim = j;
        }
        if (victim >= 0) {
          best_n = n;
          best_j = victim;
        }
      }
      if (best_n < 0) return false;
      S(best_j, best_n) = 0.0;
      S(k, best_n) = 1.0;
      count[best_j] -= 1.0;
      count[k] += 1.0;
    }
  }
  return true;
}

}  // namespace

void require_feasible_shape(int K, int N, int U, int L) {
  if (K < 1 || N < 1 || U < 1 || L < 0) throw InfeasibleError("non-positive problem dimensions");
  if (U > K) throw InfeasibleError("an AP cannot serve more users than exist");
  if (L > N) throw InfeasibleError("a user cannot be served by more APs than exist");
  if (static_cast<long>(K) * L > static_cast<long>(N) * U) {
    throw InfeasibleError("K * L exceeds the total AP capacity N * U");
  }
}

double assignment_space_size(int K, int N, int U) {
  double choose = 1.0;
  for (int i = 1; i <= U; ++i) choose = choose * (K - U + i) / i;
  return std::pow(std::round(choose), N);
}

AssignmentResult exhaustive(const Eigen::MatrixXd& gains, int U, int L, double noise_power,
                            bool require_lower, std::uint64_t budget) {
  const int K = static_cast<int>(gains.rows());
  const int N = static_cast<int>(gains.cols());
  require_feasible_shape(K, N, U, L);
  AssignmentResult best;
  best.search_space = assignment_space_size(K, N, U);
  if (best.search_space > static_cast<double>(budget)) {
    best.available = false;
    return best;
  }

  const auto choices = subsets(K, U);
  const int C = static_cast<int>(choices.size());
  std::vector<int> pick(N, 0);
  // received[n] holds the per-user received power after APs 0..n-1
  std::vector<Eigen::VectorXd> received(N + 1, Eigen::VectorXd::Zero(K));
  std::vector<Eigen::VectorXi> served(N + 1, Eigen::VectorXi::Zero(K));
  auto apply = [&](int n) {
    received[n + 1] = received[n];
    served[n + 1] = served[n];
    for (int k : choices[pick[n]]) {
      received[n + 1][k] += gains(k, n);
      served[n + 1][k] += 1;
    }
  };
  for (int n = 0; n < N; ++n) apply(n);

  bool found = false;
  std::vector<int> best_pick;
  double best_rate = 0.0;
  std::uint64_t count = 0;
  while (true) {
    ++count;
    const bool ok = !require_lower || (served[N].array() >= L).all();
    if (ok) {
      double f = 0.0;
      for (int k = 0; k < K; ++k) f += std::log2(1.0 + received[N][k] / noise_power);
      if (!found || f > best_rate) {
        found = true;
        best_rate = f;
        best_pick = pick;
      }
    }
    int n = N - 1;
    while (n >= 0 && pick[n] == C - 1) --n;
    if (n < 0) break;
    ++pick[n];
    apply(n);
    for (int m = n + 1; m < N; ++m) {
      pick[m] = 0;
      apply(m);
    }
  }

  best.enumerated_count = count;
  if (!found) return best;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(K, N);
  for (int n = 0; n < N; ++n) {
    for (int k : choices[best_pick[n]]) S(k, n) = 1.0;
  }
  auto r = finish(std::move(S), gains, U, L, noise_power);
  r.enumerated_count = count;
  r.search_space = best.search_space;
  return r;
}

AssignmentResult random_assignment(const Eigen::MatrixXd& gains, int U, int L, double noise_power,
                                   Rng& rng, int max_redraws) {
  const int K = static_cast<int>(gains.rows());
  const int N = static_cast<int>(gains.cols());
  require_feasible_shape(K, N, U, L);
  std::vector<int> users(K);
  auto draw = [&]() {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(K, N);
    for (int n = 0; n < N; ++n) {
      std::iota(users.begin(), users.end(), 0);
      for (int i = 0; i < U; ++i) {
        std::uniform_int_distribution<int> pick(i, K - 1);
        std::swap(users[i], users[pick(rng)]);
        S(users[i], n) = 1.0;
      }
    }
    return S;
  };

  for (int attempt = 0; attempt <= max_redraws; ++attempt) {
    Eigen::MatrixXd S = draw();
    if ((S.rowwise().sum().array() >= L).all()) return finish(std::move(S), gains, U, L, noise_power);
  }
  for (int attempt = 0; attempt <= max_redraws; ++attempt) {
    Eigen::MatrixXd S = draw();
    if (repair_lower(S, gains, L)) return finish(std::move(S), gains, U, L, noise_power);
  }
  throw InfeasibleError("random assignment could not be repaired");
}

AssignmentResult gsd(const Eigen::MatrixXd& gains, int U, int L, double noise_power) {
  const int K = static_cast<int>(gains.rows());
  const int N = static_cast<int>(gains.cols());
  require_feasible_shape(K, N, U, L);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(K, N);
  std::vector<int> capacity(N, U);

  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd best_gain = gains.rowwise().maxCoeff();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return best_gain[a] > best_gain[b]; });

  std::vector<int> aps(N);
  for (int k : order) {
    std::iota(aps.begin(), aps.end(), 0);
    std::stable_sort(aps.begin(), aps.end(),
                     [&](int a, int b) { return gains(k, a) > gains(k, b); });
    int claimed = 0;
    for (int n : aps) {
      if (claimed == L) break;
      if (capacity[n] == 0) continue;
      S(k, n) = 1.0;
      --capacity[n];
      ++claimed;
    }
  }

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(K) * N);
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N; ++n) {
      if (S(k, n) == 0.0) pairs.emplace_back(k, n);
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
    return gains(a.first, a.second) > gains(b.first, b.second);
  });
  for (const auto& [k, n] : pairs) {
    if (capacity[n] == 0) continue;
    S(k, n) = 1.0;
    --capacity[n];
  }

  if (!repair_lower(S, gains, L)) throw InfeasibleError("gsd could not meet the lower bound");
  return finish(std::move(S), gains, U, L, noise_power);
}

}  // namespace cfa
