#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cfa {

using Rng = std::mt19937_64;

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

double distance(const Point& a, const Point& b);

struct Area {
  double width = 0.0;
  double height = 0.0;

  double diagonal() const;
  bool contains(const Point& p) const;
  bool operator==(const Area&) const = default;
};

/// Row-major AP grid. Every row except the last must be full; the last row
/// holds the remainder. Axis coordinates sit `margin_fraction` of the side in
/// from each edge and are evenly spaced between; a single-point axis is
/// centered.
struct GridLayout {
  int rows = 1;
  int cols = 1;
  double margin_fraction = 0.05;

  bool operator==(const GridLayout&) const = default;
};

struct Scenario {
  std::string name = "custom";
  int n_aps = 0;
  int n_users = 0;
  Area area;
  GridLayout layout;
  std::vector<Point> ap_positions;
  int min_serving_aps = 0;   // L
  int max_served_users = 1;  // U
  double noise_power = 1.0;
  double gain_scale = 1.0;
  double rician_variance = 0.0;

  /// Throws InvalidScenarioError (or InfeasibleError for K*L > N*U).
  void validate() const;
  bool operator==(const Scenario&) const = default;
};

/// 5 APs on a 2x3 grid over 100 m x 100 m, 4 users, L = U = 2.
Scenario small_scenario();
/// 20 APs on a 4x5 grid over 1000 m x 1000 m, 15 users, L = U = 2.
Scenario large_scenario();
Scenario scenario_preset(const std::string& name);

/// gains is K x N (row = user, column = AP), linear scale.
struct ChannelRealization {
  Eigen::MatrixXd gains;
  std::vector<Point> user_positions;

  bool operator==(const ChannelRealization& other) const;
};

enum class Split { Train, Test };

std::string to_string(Split split);
Split split_from_string(const std::string& text);

struct Dataset {
  Scenario scenario;
  std::vector<ChannelRealization> samples;
  std::uint64_t seed = 0;
  Split split = Split::Train;

  bool operator==(const Dataset& other) const;
};

std::vector<Point> place_aps(const GridLayout& layout, int n_aps, const Area& area);

std::vector<Point> sample_users(Rng& rng, int n_users, const Area& area);

/// Counters for the fading sampler's fallback paths.
struct FadingStats {
  std::uint64_t draws = 0;
  /// Requested variance exceeded what a Rician law can reach at this mean;
  /// the draw used the Rayleigh limit instead.
  std::uint64_t variance_capped = 0;
  /// Near-deterministic regime sampled as a moment-matched Gaussian that
  /// came out negative and was clamped to 0.
  std::uint64_t clamped = 0;
};

/// Rician draw of the linear effective gain, mean gain_scale/d and variance
/// rician_variance.
double channel_gain(const Point& ap, const Point& user, const Scenario& scenario, Rng& rng,
                    FadingStats* stats = nullptr);

ChannelRealization sample_realization(const Scenario& scenario, Rng& rng,
                                      FadingStats* stats = nullptr);

/// Sample i is drawn from its own stream seeded by (seed, i), so the result
/// does not depend on generation order.
Dataset generate_dataset(const Scenario& scenario, int size, std::uint64_t seed, Split split,
                         FadingStats* stats = nullptr);

inline constexpr int kDatasetSchemaVersion = 1;

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace cfa
