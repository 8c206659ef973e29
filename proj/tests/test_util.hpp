#pragma once

// Shared fixtures and independent reference implementations for the tests.
// The oracles deliberately use plain loops and std::exp per pair, with no
// code shared with the library's matrix paths.

#include "mmdsense/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

namespace mmdsense_test {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mmdsense_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Eigen::MatrixXd gaussian(mmdsense::Rng& rng, Eigen::Index rows, Eigen::Index cols, double shift = 0.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index d = 0; d < cols; ++d) m(i, d) = rng.normal() + shift;
  }
  return m;
}

inline double naive_kernel(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j,
                           const Eigen::VectorXd& w, const Eigen::VectorXd& gamma) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    const double z = w(d) * (a(i, d) - b(j, d)) / gamma(d);
    s += z * z;
  }
  return std::exp(-s / static_cast<double>(a.cols()));
}

/// Unbiased MMD^2 with unequal sizes, as three literal double sums.
inline double naive_mmd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& gamma) {
  const Eigen::Index n = x.rows(), m = y.rows();
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      if (i != k) sxx += naive_kernel(x, i, x, k, w, gamma);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k < m; ++k)
      if (j != k) syy += naive_kernel(y, j, y, k, w, gamma);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) sxy += naive_kernel(x, i, y, j, w, gamma);
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  return sxx / (dn * (dn - 1)) + syy / (dm * (dm - 1)) - 2.0 * sxy / (dn * dm);
}

/// 4/n Var_i f_i + 4/m Var_j g_j with
///   f_i = mean_{i' != i} k(x_i, x_i') - mean_j k(x_i, y_j)
///   g_j = mean_{j' != j} k(y_j, y_j') - mean_i k(x_i, y_j)
/// and sample variances (n - 1, m - 1 denominators), clamped at 0.
inline double naive_variance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& w,
                             const Eigen::VectorXd& gamma) {
  const Eigen::Index n = x.rows(), m = y.rows();
  std::vector<double> f(static_cast<std::size_t>(n)), g(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < n; ++i) {
    double within = 0.0, cross = 0.0;
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i) within += naive_kernel(x, i, x, k, w, gamma);
    for (Eigen::Index j = 0; j < m; ++j) cross += naive_kernel(x, i, y, j, w, gamma);
    f[static_cast<std::size_t>(i)] = within / static_cast<double>(n - 1) - cross / static_cast<double>(m);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    double within = 0.0, cross = 0.0;
    for (Eigen::Index k = 0; k < m; ++k)
      if (k != j) within += naive_kernel(y, j, y, k, w, gamma);
    for (Eigen::Index i = 0; i < n; ++i) cross += naive_kernel(x, i, y, j, w, gamma);
    g[static_cast<std::size_t>(j)] = within / static_cast<double>(m - 1) - cross / static_cast<double>(n);
  }
  auto var = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double e : v) mean += e;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double e : v) ss += (e - mean) * (e - mean);
    return ss / static_cast<double>(v.size() - 1);
  };
  const double v = 4.0 / static_cast<double>(n) * var(f) + 4.0 / static_cast<double>(m) * var(g);
  return v > 0.0 ? v : 0.0;
}

/// -log(max(l, 1e-12)) from the naive oracles.
inline double naive_smooth_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& w,
                                     const Eigen::VectorXd& gamma) {
  const double ratio = naive_mmd(x, y, w, gamma) / std::sqrt(naive_variance(x, y, w, gamma) + 1e-8);
  return -std::log(ratio > 1e-12 ? ratio : 1e-12);
}

}  // namespace mmdsense_test
