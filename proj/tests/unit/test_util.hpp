#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace cfa::test {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cfassign_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Eigen::MatrixXd random_gains(std::mt19937_64& rng, int users, int aps, double lo = 0.1,
                                    double hi = 5.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd g(users, aps);
  for (int k = 0; k < users; ++k) {
    for (int n = 0; n < aps; ++n) g(k, n) = u(rng);
  }
  return g;
}

}  // namespace cfa::test
