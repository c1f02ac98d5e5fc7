#include <doctest.h>

#include <cmath>

#include "acceptance/oracles.hpp"
#include "cfassign/baselines.hpp"
#include "cfassign/errors.hpp"
#include "cfassign/problem.hpp"
#include "test_util.hpp"

using namespace cfa;
using Eigen::MatrixXd;

namespace {

bool feasible(const MatrixXd& s, int U, int L, bool exact_u) {
  for (int n = 0; n < s.cols(); ++n) {
    const double c = s.col(n).sum();
    if (exact_u ? c != U : c > U) return false;
  }
  for (int k = 0; k < s.rows(); ++k) {
    if (s.row(k).sum() < L) return false;
  }
  return ((s.array() == 0.0) || (s.array() == 1.0)).all();
}

// Uniform U-subset per AP, redrawn until every user has L APs.
MatrixXd random_feasible(std::mt19937_64& rng, int K, int N, int U, int L) {
  std::vector<int> users(K);
  for (;;) {
    MatrixXd s = MatrixXd::Zero(K, N);
    for (int n = 0; n < N; ++n) {
      std::iota(users.begin(), users.end(), 0);
      std::shuffle(users.begin(), users.end(), rng);
      for (int i = 0; i < U; ++i) s(users[i], n) = 1.0;
    }
    if (feasible(s, U, L, true)) return s;
  }
}

}  // namespace

TEST_CASE("feasibility preconditions") {
  CHECK_NOTHROW(require_feasible_shape(4, 5, 2, 2));
  CHECK_THROWS_AS(require_feasible_shape(4, 1, 2, 3), InfeasibleError);
  CHECK_THROWS_AS(require_feasible_shape(4, 2, 1, 1), InfeasibleError);
  CHECK_THROWS_AS(require_feasible_shape(2, 5, 3, 1), InfeasibleError);
  CHECK(assignment_space_size(4, 5, 2) == 7776.0);
  CHECK(assignment_space_size(15, 20, 2) == doctest::Approx(std::pow(105.0, 20)));
}

TEST_CASE("exhaustive search") {
  std::mt19937_64 rng(5);
  const MatrixXd g = test::random_gains(rng, 4, 5);
  const auto r = exhaustive(g, 2, 2, 1.0);
  CHECK(r.enumerated_count == 7776);
  CHECK(r.available);
  CHECK(r.feasible);
  CHECK(feasible(r.S, 2, 2, true));
  CHECK(r.sum_rate == doctest::Approx(sum_rate(g, r.S, 1.0)));
  CHECK(exhaustive(g, 2, 2, 1.0, false).enumerated_count == 7776);
  CHECK(exhaustive(g, 2, 2, 1.0, false).sum_rate >= r.sum_rate);

  const MatrixXd one = (MatrixXd(1, 2) << 0.3, 0.8).finished();
  const auto single = exhaustive(one, 1, 1, 1.0);
  CHECK(single.S == MatrixXd::Ones(1, 2));

  const auto over = exhaustive(test::random_gains(rng, 15, 20), 2, 2, 1.0);
  CHECK_FALSE(over.available);
  CHECK(over.S.size() == 0);
  CHECK(over.search_space == doctest::Approx(std::pow(105.0, 20)));
  CHECK_FALSE(exhaustive(g, 2, 2, 1.0, true, 7775).available);
  CHECK(exhaustive(g, 2, 2, 1.0, true, 7776).available);
}

TEST_CASE("exhaustive agrees with an independent brute-force enumerator") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int U = 1 + trial % 2;
    const int L = U == 2 && trial % 3 == 0 ? 2 : 1;
    const MatrixXd g = test::random_gains(rng, 3, 3, 0.01, 3.0);
    const auto got = exhaustive(g, U, L, 0.5);
    const auto want = oracle::brute_force(g, U, L, 0.5);
    CHECK(got.enumerated_count == want.exact_u_count);
    CHECK(got.S == want.best);
    CHECK(got.sum_rate == doctest::Approx(want.rate).epsilon(1e-12));
  }
}

TEST_CASE("exhaustive dominates random feasible assignments") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 3; ++trial) {
    const MatrixXd g = test::random_gains(rng, 4, 5);
    const double best = exhaustive(g, 2, 2, 1.0).sum_rate;
    for (int i = 0; i < 10000; ++i) {
      const MatrixXd s = random_feasible(rng, 4, 5, 2, 2);
      REQUIRE(sum_rate(g, s, 1.0) <= best + 1e-12);
    }
  }
}

TEST_CASE("random assignment") {
  Rng rng(8);
  std::mt19937_64 grng(8);
  const MatrixXd g = test::random_gains(grng, 4, 5);
  for (int i = 0; i < 200; ++i) {
    const auto r = random_assignment(g, 2, 2, 1.0, rng);
    REQUIRE(r.feasible);
    REQUIRE(feasible(r.S, 2, 2, true));
  }
  const auto all = random_assignment(g, 4, 2, 1.0, rng);
  CHECK(all.S == MatrixXd::Ones(4, 5));

  // tight instance: K L = N U, forcing the repair path when redraws are off
  for (int i = 0; i < 50; ++i) {
    const MatrixXd tight = test::random_gains(grng, 5, 5);
    const auto r = random_assignment(tight, 2, 2, 1.0, rng, 0);
    REQUIRE(feasible(r.S, 2, 2, true));
  }
  CHECK_THROWS_AS(random_assignment(g, 1, 3, 1.0, rng), InfeasibleError);
}

TEST_CASE("greedy serial dictatorship") {
  const MatrixXd g = (MatrixXd(1, 2) << 3.0, 5.0).finished();
  CHECK(gsd(g, 1, 1, 1.0).S == MatrixXd::Ones(1, 2));

  // user 1 has the best gain and claims AP 0; user 0 takes AP 1; phase B
  // gives the last free slot (AP 2) to the larger remaining gain.
  MatrixXd h(2, 3);
  h << 4.0, 3.0, 1.0,  //
      9.0, 8.0, 0.5;
  const auto r = gsd(h, 1, 1, 1.0);
  MatrixXd want(2, 3);
  want << 0, 1, 1,  //
      1, 0, 0;
  CHECK(r.S == want);

  std::mt19937_64 rng(31);
  Rng rrng(31);
  double gsd_total = 0.0;
  double random_total = 0.0;
  for (int i = 0; i < 200; ++i) {
    const MatrixXd x = test::random_gains(rng, 4, 5);
    const auto a = gsd(x, 2, 2, 1.0);
    REQUIRE(feasible(a.S, 2, 2, false));
    REQUIRE(a.sum_rate <= exhaustive(x, 2, 2, 1.0).sum_rate + 1e-12);
    CHECK(gsd(x, 2, 2, 1.0).S == a.S);
    gsd_total += a.sum_rate;
    random_total += random_assignment(x, 2, 2, 1.0, rrng).sum_rate;
  }
  CHECK(gsd_total > random_total);
}
