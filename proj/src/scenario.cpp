#include "cfassign/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "cfassign/errors.hpp"
#include "text_io.hpp"

namespace cfa {

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double Area::diagonal() const { return std::hypot(width, height); }

bool Area::contains(const Point& p) const {
  return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
}

void Scenario::validate() const {
  if (n_aps < 1) throw InvalidScenarioError("n_aps must be >= 1");
  if (n_users < 1) throw InvalidScenarioError("n_users must be >= 1");
  if (max_served_users < 1 || max_served_users > n_users) {
    throw InvalidScenarioError("max_served_users must lie in [1, n_users]");
  }
  if (min_serving_aps < 0 || min_serving_aps > n_aps) {
    throw InvalidScenarioError("min_serving_aps must lie in [0, n_aps]");
  }
  if (!(area.width > 0.0) || !(area.height > 0.0)) {
    throw InvalidScenarioError("area side lengths must be positive");
  }
  if (static_cast<int>(ap_positions.size()) != n_aps) {
    throw InvalidScenarioError("ap_positions must have exactly n_aps entries");
  }
  for (const auto& p : ap_positions) {
    if (!area.contains(p)) throw InvalidScenarioError("AP position outside the area");
  }
  if (!(noise_power > 0.0) || !(gain_scale > 0.0) || !(rician_variance >= 0.0)) {
    throw InvalidScenarioError("noise_power and gain_scale must be > 0, rician_variance >= 0");
  }
  if (static_cast<long>(n_users) * min_serving_aps > static_cast<long>(n_aps) * max_served_users) {
    throw InfeasibleError("n_users * min_serving_aps exceeds n_aps * max_served_users");
  }
}

// gain_scale equals the median nearest-AP distance of a uniform user drop, so
// the median best-link SNR is 1 with unit noise power. Fading variance is
// (0.1 * mean)^2 at that operating point.
Scenario small_scenario() {
  Scenario s;
  s.name = "small";
  s.n_aps = 5;
  s.n_users = 4;
  s.area = {100.0, 100.0};
  s.layout = {2, 3, 0.05};
  s.ap_positions = place_aps(s.layout, s.n_aps, s.area);
  s.min_serving_aps = 2;
  s.max_served_users = 2;
  s.noise_power = 1.0;
  s.gain_scale = 26.9;
  s.rician_variance = 0.01;
  return s;
}

Scenario large_scenario() {
  Scenario s;
  s.name = "large";
  s.n_aps = 20;
  s.n_users = 15;
  s.area = {1000.0, 1000.0};
  s.layout = {4, 5, 0.05};
  s.ap_positions = place_aps(s.layout, s.n_aps, s.area);
  s.min_serving_aps = 2;
  s.max_served_users = 2;
  s.noise_power = 1.0;
  s.gain_scale = 97.7;
  s.rician_variance = 0.01;
  return s;
}

Scenario scenario_preset(const std::string& name) {
  if (name == "small") return small_scenario();
  if (name == "large") return large_scenario();
  throw InvalidScenarioError("unknown scenario preset '" + name + "'");
}

bool ChannelRealization::operator==(const ChannelRealization& other) const {
  return gains.rows() == other.gains.rows() && gains.cols() == other.gains.cols() &&
         gains == other.gains && user_positions == other.user_positions;
}

std::string to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split split_from_string(const std::string& text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  throw SchemaError("unknown split tag '" + text + "'");
}

bool Dataset::operator==(const Dataset& other) const {
  return scenario == other.scenario && samples == other.samples && seed == other.seed &&
         split == other.split;
}

namespace {

std::vector<double> axis_points(int count, double side, double margin_fraction) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = side / 2.0;
    return out;
  }
  const double margin = margin_fraction * side;
  const double pitch = (side - 2.0 * margin) / (count - 1);
  for (int i = 0; i < count; ++i) out[i] = margin + pitch * i;
  return out;
}

}  // namespace

std::vector<Point> place_aps(const GridLayout& layout, int n_aps, const Area& area) {
  if (layout.rows < 1 || layout.cols < 1 || n_aps < 1) {
    throw InvalidLayoutError("grid needs at least one row, one column and one AP");
  }
  if (n_aps > layout.rows * layout.cols || n_aps <= (layout.rows - 1) * layout.cols) {
    throw InvalidLayoutError("n_aps=" + std::to_string(n_aps) + " does not fill a " +
                             std::to_string(layout.rows) + "x" + std::to_string(layout.cols) +
                             " grid row by row");
  }
  if (layout.margin_fraction < 0.0 || layout.margin_fraction >= 0.5) {
    throw InvalidLayoutError("margin_fraction must lie in [0, 0.5)");
  }
  const auto xs = axis_points(layout.cols, area.width, layout.margin_fraction);
  const auto ys = axis_points(layout.rows, area.height, layout.margin_fraction);
  std::vector<Point> points;
  points.reserve(n_aps);
  for (int i = 0; i < n_aps; ++i) points.push_back({xs[i % layout.cols], ys[i / layout.cols]});
  return points;
}

std::vector<Point> sample_users(Rng& rng, int n_users, const Area& area) {
  if (n_users < 1) throw InvalidScenarioError("n_users must be >= 1");
  std::uniform_real_distribution<double> ux(0.0, area.width);
  std::uniform_real_distribution<double> uy(0.0, area.height);
  std::vector<Point> points(n_users);
  for (auto& p : points) {
    p.x = ux(rng);
    p.y = uy(rng);
  }
  return points;
}

namespace {

// Rician law with noncentrality nu and scale sigma; theta = nu / sigma.
// mean / sigma = sqrt(pi/2) * L_{1/2}(-theta^2 / 2).
double rician_unit_mean(double theta) {
  const double t = theta * theta / 4.0;
  const double scaled = std::exp(-t) * ((1.0 + 2.0 * t) * std::cyl_bessel_i(0.0, t) +
                                        2.0 * t * std::cyl_bessel_i(1.0, t));
  return std::sqrt(std::numbers::pi / 2.0) * scaled;
}

// variance / mean^2 as a function of theta; decreasing from 4/pi - 1 at 0.
double rician_dispersion(double theta) {
  const double m = rician_unit_mean(theta);
  return (2.0 + theta * theta) / (m * m) - 1.0;
}

constexpr double kMaxTheta = 40.0;
constexpr int kTableSize = 4001;

struct DispersionTable {
  std::array<double, kTableSize> theta{};
  std::array<double, kTableSize> dispersion{};

  DispersionTable() {
    for (int i = 0; i < kTableSize; ++i) {
      theta[i] = kMaxTheta * i / (kTableSize - 1);
      dispersion[i] = rician_dispersion(theta[i]);
    }
  }

  // Inverse of rician_dispersion on [0, kMaxTheta]: table bracket, linear
  // interpolation, then one Newton step on the exact function.
  double invert(double target) const {
    auto it = std::lower_bound(dispersion.rbegin(), dispersion.rend(), target);
    const int hi = static_cast<int>(dispersion.rend() - it) - 1;  // dispersion[hi] >= target
    const int lo = std::min(hi + 1, kTableSize - 1);
    double th = theta[hi];
    if (lo != hi) {
      const double w = (dispersion[hi] - target) / (dispersion[hi] - dispersion[lo]);
      th = theta[hi] + w * (theta[lo] - theta[hi]);
      const double slope = (dispersion[lo] - dispersion[hi]) / (theta[lo] - theta[hi]);
      th -= (rician_dispersion(th) - target) / slope;
      th = std::clamp(th, theta[hi], theta[lo]);
    }
    return th;
  }
};

const DispersionTable& dispersion_table() {
  static const DispersionTable table;
  return table;
}

}  // namespace

double channel_gain(const Point& ap, const Point& user, const Scenario& scenario, Rng& rng,
                    FadingStats* stats) {
  const double d = distance(ap, user);
  if (!(d > 0.0)) throw DegenerateGeometryError("AP and user positions coincide");
  const double mean = scenario.gain_scale / d;
  if (stats) ++stats->draws;
  if (scenario.rician_variance == 0.0) return mean;

  std::normal_distribution<double> normal(0.0, 1.0);
  const double target = scenario.rician_variance / (mean * mean);
  const auto& table = dispersion_table();

  if (target < table.dispersion.back()) {
    // theta beyond 40: the Rician law is Gaussian to within its skewness
    // (~1/theta^3), so sample the moment-matched Gaussian directly.
    double g = mean + std::sqrt(scenario.rician_variance) * normal(rng);
    if (g < 0.0) {
      if (stats) ++stats->clamped;
      g = 0.0;
    }
    return g;
  }

  double theta = 0.0;
  if (target >= table.dispersion.front()) {
    if (stats && target > table.dispersion.front()) ++stats->variance_capped;
  } else {
    theta = table.invert(target);
  }
  const double sigma = mean / rician_unit_mean(theta);
  const double nu = theta * sigma;
  const double a = nu + sigma * normal(rng);
  const double b = sigma * normal(rng);
  return std::hypot(a, b);
}

ChannelRealization sample_realization(const Scenario& scenario, Rng& rng, FadingStats* stats) {
  ChannelRealization r;
  r.user_positions = sample_users(rng, scenario.n_users, scenario.area);
  r.gains.resize(scenario.n_users, scenario.n_aps);
  for (int k = 0; k < scenario.n_users; ++k) {
    for (int n = 0; n < scenario.n_aps; ++n) {
      r.gains(k, n) = channel_gain(scenario.ap_positions[n], r.user_positions[k], scenario, rng,
                                   stats);
    }
  }
  return r;
}

Dataset generate_dataset(const Scenario& scenario, int size, std::uint64_t seed, Split split,
                         FadingStats* stats) {
  if (size < 1) throw InvalidScenarioError("dataset size must be >= 1");
  scenario.validate();
  Dataset ds;
  ds.scenario = scenario;
  ds.seed = seed;
  ds.split = split;
  ds.samples.reserve(size);
  for (int i = 0; i < size; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    Rng rng(seq);
    ds.samples.push_back(sample_realization(scenario, rng, stats));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset file

namespace {

constexpr const char* kDatasetMagic = "cfassign-dataset";

std::string join_points(const std::vector<Point>& pts) {
  std::string out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out += ' ';
    out += text::format_double(pts[i].x) + ' ' + text::format_double(pts[i].y);
  }
  return out;
}

std::vector<Point> parse_points(const std::vector<std::string>& toks, std::size_t first,
                                std::size_t count) {
  if (toks.size() < first + 2 * count) throw SchemaError("too few coordinates");
  std::vector<Point> pts(count);
  for (std::size_t i = 0; i < count; ++i) {
    pts[i].x = text::parse_double(toks[first + 2 * i]);
    pts[i].y = text::parse_double(toks[first + 2 * i + 1]);
  }
  return pts;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  const auto& s = dataset.scenario;
  out << kDatasetMagic << '\n';
  out << "version=" << kDatasetSchemaVersion << '\n';
  out << "name=" << s.name << '\n';
  out << "n_aps=" << s.n_aps << '\n';
  out << "n_users=" << s.n_users << '\n';
  out << "area=" << text::format_double(s.area.width) << ' ' << text::format_double(s.area.height)
      << '\n';
  out << "layout=" << s.layout.rows << ' ' << s.layout.cols << ' '
      << text::format_double(s.layout.margin_fraction) << '\n';
  out << "ap_positions=" << join_points(s.ap_positions) << '\n';
  out << "min_serving_aps=" << s.min_serving_aps << '\n';
  out << "max_served_users=" << s.max_served_users << '\n';
  out << "noise_power=" << text::format_double(s.noise_power) << '\n';
  out << "gain_scale=" << text::format_double(s.gain_scale) << '\n';
  out << "rician_variance=" << text::format_double(s.rician_variance) << '\n';
  out << "seed=" << dataset.seed << '\n';
  out << "split=" << to_string(dataset.split) << '\n';
  out << "size=" << dataset.samples.size() << '\n';
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& r = dataset.samples[i];
    out << "sample " << i << " users " << join_points(r.user_positions) << " gains";
    for (Eigen::Index k = 0; k < r.gains.rows(); ++k) {
      for (Eigen::Index n = 0; n < r.gains.cols(); ++n) out << ' ' << text::format_double(r.gains(k, n));
    }
    out << '\n';
  }
  out << "end\n";
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kDatasetMagic) {
    throw SchemaError("'" + path.string() + "' is not a dataset file");
  }
  const int version = text::parse_int<int>(text::expect_key(in, "version"));
  if (version != kDatasetSchemaVersion) {
    throw VersionError("dataset schema version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kDatasetSchemaVersion) + ")");
  }
  Dataset ds;
  auto& s = ds.scenario;
  s.name = text::expect_key(in, "name");
  s.n_aps = text::parse_int<int>(text::expect_key(in, "n_aps"));
  s.n_users = text::parse_int<int>(text::expect_key(in, "n_users"));
  {
    auto toks = text::split_ws(text::expect_key(in, "area"));
    if (toks.size() != 2) throw SchemaError("area needs two values");
    s.area = {text::parse_double(toks[0]), text::parse_double(toks[1])};
  }
  {
    auto toks = text::split_ws(text::expect_key(in, "layout"));
    if (toks.size() != 3) throw SchemaError("layout needs three values");
    s.layout = {text::parse_int<int>(toks[0]), text::parse_int<int>(toks[1]),
                text::parse_double(toks[2])};
  }
  if (s.n_aps < 1 || s.n_users < 1) throw SchemaError("dimensions must be positive");
  s.ap_positions =
      parse_points(text::split_ws(text::expect_key(in, "ap_positions")), 0, s.n_aps);
  s.min_serving_aps = text::parse_int<int>(text::expect_key(in, "min_serving_aps"));
  s.max_served_users = text::parse_int<int>(text::expect_key(in, "max_served_users"));
  s.noise_power = text::parse_double(text::expect_key(in, "noise_power"));
  s.gain_scale = text::parse_double(text::expect_key(in, "gain_scale"));
  s.rician_variance = text::parse_double(text::expect_key(in, "rician_variance"));
  ds.seed = text::parse_int<std::uint64_t>(text::expect_key(in, "seed"));
  ds.split = split_from_string(text::expect_key(in, "split"));
  const auto size = text::parse_int<std::size_t>(text::expect_key(in, "size"));
  try {
    s.validate();
  } catch (const Error& e) {
    throw SchemaError(std::string("invalid scenario header: ") + e.what());
  }

  const std::size_t K = s.n_users;
  const std::size_t N = s.n_aps;
  ds.samples.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    if (!std::getline(in, line)) {
      throw SchemaError("truncated dataset: " + std::to_string(i) + " of " + std::to_string(size) +
                        " samples present");
    }
    const auto toks = text::split_ws(line);
    const std::size_t expected = 4 + 2 * K + K * N;
    if (toks.size() != expected || toks[0] != "sample" || toks[2] != "users" ||
        toks[3 + 2 * K] != "gains" || text::parse_int<std::size_t>(toks[1]) != i) {
      throw SchemaError("malformed sample record " + std::to_string(i));
    }
    ChannelRealization r;
    r.user_positions = parse_points(toks, 3, K);
    r.gains.resize(K, N);
    std::size_t t = 4 + 2 * K;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t n = 0; n < N; ++n) r.gains(k, n) = text::parse_double(toks[t++]);
    }
    ds.samples.push_back(std::move(r));
  }
  if (!std::getline(in, line) || line != "end") throw SchemaError("missing end marker");
  return ds;
}

}  // namespace cfa
