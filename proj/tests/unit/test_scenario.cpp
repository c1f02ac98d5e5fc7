#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cfassign/errors.hpp"
#include "cfassign/scenario.hpp"
#include "test_util.hpp"

using namespace cfa;

namespace {

bool has_point(const std::vector<Point>& pts, double x, double y) {
  for (const auto& p : pts) {
    if (std::abs(p.x - x) < 1e-9 && std::abs(p.y - y) < 1e-9) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("small layout matches the plotted AP coordinates") {
  const auto pts = place_aps({2, 3, 0.05}, 5, {100.0, 100.0});
  REQUIRE(pts.size() == 5);
  for (auto [x, y] : {std::pair{5.0, 5.0}, {50.0, 5.0}, {95.0, 5.0}, {5.0, 95.0}, {50.0, 95.0}}) {
    CHECK(has_point(pts, x, y));
  }
}

TEST_CASE("large layout is a 5 x 4 grid") {
  const auto pts = large_scenario().ap_positions;
  REQUIRE(pts.size() == 20);
  for (double x : {50.0, 275.0, 500.0, 725.0, 950.0}) {
    for (double y : {50.0, 350.0, 650.0, 950.0}) CHECK(has_point(pts, x, y));
  }
}

TEST_CASE("single AP sits in the center") {
  const auto pts = place_aps({1, 1, 0.05}, 1, {100.0, 100.0});
  REQUIRE(pts.size() == 1);
  CHECK(pts[0] == Point{50.0, 50.0});
}

TEST_CASE("place_aps rejects counts that do not fill the grid") {
  CHECK_THROWS_AS(place_aps({2, 3, 0.05}, 7, {100, 100}), InvalidLayoutError);
  CHECK_THROWS_AS(place_aps({2, 3, 0.05}, 3, {100, 100}), InvalidLayoutError);
  CHECK(place_aps({2, 3, 0.05}, 4, {100, 100}) == place_aps({2, 3, 0.05}, 4, {100, 100}));
}

TEST_CASE("presets validate and are feasible") {
  for (const auto& s : {small_scenario(), large_scenario()}) {
    CHECK_NOTHROW(s.validate());
    CHECK(s.n_users * s.min_serving_aps <= s.n_aps * s.max_served_users);
  }
  CHECK(small_scenario().n_aps == 5);
  CHECK(small_scenario().n_users == 4);
  CHECK(large_scenario().n_aps == 20);
  CHECK(large_scenario().n_users == 15);
  CHECK_THROWS_AS(scenario_preset("medium"), InvalidScenarioError);
}

TEST_CASE("scenario validation catches infeasible constraints") {
  Scenario s = small_scenario();
  s.min_serving_aps = 5;
  s.max_served_users = 1;
  CHECK_THROWS_AS(s.validate(), InfeasibleError);
  s = small_scenario();
  s.max_served_users = 5;
  CHECK_THROWS_AS(s.validate(), InvalidScenarioError);
}

TEST_CASE("sample_users is deterministic and uniform") {
  const Area area{100.0, 60.0};
  Rng a(11);
  Rng b(11);
  CHECK(sample_users(a, 4, area) == sample_users(b, 4, area));
  CHECK_THROWS_AS(sample_users(a, 0, area), InvalidScenarioError);

  Rng rng(3);
  const auto pts = sample_users(rng, 100000, area);
  double mx = 0.0;
  double my = 0.0;
  for (const auto& p : pts) {
    CHECK_FALSE(!area.contains(p));
    mx += p.x;
    my += p.y;
  }
  mx /= pts.size();
  my /= pts.size();
  CHECK(std::abs(mx - 50.0) < 0.5);
  CHECK(std::abs(my - 30.0) < 0.3);
}

TEST_CASE("zero fading variance returns the mean gain") {
  Scenario s = small_scenario();
  s.rician_variance = 0.0;
  Rng rng(1);
  CHECK(channel_gain({0, 0}, {3, 4}, s, rng) == doctest::Approx(s.gain_scale / 5.0).epsilon(1e-15));
  CHECK_THROWS_AS(channel_gain({1, 1}, {1, 1}, s, rng), DegenerateGeometryError);
}

TEST_CASE("Rician gains follow the c/d law and the configured variance") {
  Scenario s = small_scenario();
  s.rician_variance = 0.01;
  Rng rng(5);
  const int draws = 100000;
  auto moments = [&](double d) {
    double sum = 0.0;
    double sq = 0.0;
    FadingStats stats;
    for (int i = 0; i < draws; ++i) {
      const double g = channel_gain({0, 0}, {d, 0}, s, rng, &stats);
      CHECK_FALSE(g < 0.0);
      sum += g;
      sq += g * g;
    }
    const double mean = sum / draws;
    return std::pair{mean, sq / draws - mean * mean};
  };
  const auto [m10, v10] = moments(10.0);
  const auto [m20, v20] = moments(20.0);
  CHECK(std::abs(m10 / m20 - 2.0) < 0.04);
  CHECK(std::abs(m10 - s.gain_scale / 10.0) / (s.gain_scale / 10.0) < 0.01);
  CHECK(std::abs(v10 - 0.01) / 0.01 < 0.05);
  CHECK(std::abs(v20 - 0.01) / 0.01 < 0.05);
}

TEST_CASE("variance beyond the Rayleigh limit is capped and counted") {
  Scenario s = small_scenario();
  s.gain_scale = 1.0;
  s.rician_variance = 100.0;
  Rng rng(2);
  FadingStats stats;
  for (int i = 0; i < 100; ++i) CHECK(channel_gain({0, 0}, {10, 0}, s, rng, &stats) >= 0.0);
  CHECK(stats.draws == 100);
  CHECK(stats.variance_capped == 100);
}

TEST_CASE("datasets are reproducible and seed dependent") {
  const auto s = small_scenario();
  const auto a = generate_dataset(s, 1024, 7, Split::Test);
  const auto b = generate_dataset(s, 1024, 7, Split::Test);
  const auto c = generate_dataset(s, 16, 8, Split::Test);
  REQUIRE(a.samples.size() == 1024);
  CHECK(a == b);
  bool differs = false;
  for (int i = 0; i < 16; ++i) differs |= !(a.samples[i].gains == c.samples[i].gains);
  CHECK(differs);
  for (const auto& r : a.samples) {
    CHECK(r.gains.rows() == 4);
    CHECK(r.gains.cols() == 5);
    CHECK((r.gains.array() >= 0.0).all());
  }
  // a prefix of a longer dataset equals the shorter dataset
  const auto prefix = generate_dataset(s, 8, 7, Split::Test);
  for (int i = 0; i < 8; ++i) CHECK(prefix.samples[i] == a.samples[i]);
  CHECK_THROWS_AS(generate_dataset(s, 0, 7, Split::Test), InvalidScenarioError);
}

TEST_CASE("train seed s and test seed s + 1 give disjoint streams") {
  const auto s = small_scenario();
  const auto train = generate_dataset(s, 64, 3, Split::Train);
  const auto test = generate_dataset(s, 64, 4, Split::Test);
  for (const auto& a : train.samples) {
    for (const auto& b : test.samples) CHECK_FALSE(a.gains == b.gains);
  }
}

TEST_CASE("dataset files round-trip exactly") {
  const auto dir = test::scratch_dir("dataset");
  const auto ds = generate_dataset(large_scenario(), 5, 99, Split::Train);
  save_dataset(ds, dir / "d.txt");
  const auto back = load_dataset(dir / "d.txt");
  CHECK(back == ds);
}

TEST_CASE("truncated and future-version dataset files are rejected") {
  const auto dir = test::scratch_dir("dataset_bad");
  save_dataset(generate_dataset(small_scenario(), 4, 1, Split::Train), dir / "d.txt");
  std::ifstream in(dir / "d.txt");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  {
    std::ofstream out(dir / "trunc.txt");
    out << text.substr(0, text.size() * 2 / 3);
  }
  CHECK_THROWS_AS(load_dataset(dir / "trunc.txt"), SchemaError);

  std::string future = text;
  future.replace(future.find("version=1"), 9, "version=2");
  {
    std::ofstream out(dir / "future.txt");
    out << future;
  }
  CHECK_THROWS_AS(load_dataset(dir / "future.txt"), VersionError);
}
