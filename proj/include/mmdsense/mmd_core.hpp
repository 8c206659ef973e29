#pragma once

#include "mmdsense/ard_kernel.hpp"
#include "mmdsense/error.hpp"
#include "mmdsense/numeric.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace mmdsense {

/// Added to the variance under the square root of the ratio statistic.
inline constexpr double kRatioStabilizer = 1e-8;

struct MmdEstimate {
  double mmd_sq = 0.0;
  double variance = 0.0;
  double ratio = 0.0;
  Eigen::Index n_x = 0;
  Eigen::Index n_y = 0;
};

namespace detail {

inline void require_samples(Eigen::Index n, Eigen::Index m, Eigen::Index minimum, const char* what) {
  if (n < minimum || m < minimum) {
    throw Error(ErrorCode::sample_too_small, std::string(what) + " needs at least " + std::to_string(minimum) +
                                                 " samples per side, got " + std::to_string(n) + " and " +
                                                 std::to_string(m));
  }
}

/// Kernel blocks plus every reduction the estimator, its variance and their
/// gradients share.
///
/// Variance estimator: first-order (asymptotic) variance of the two-sample
/// U-statistic,
///   V = 4/n Var_i[f_i] + 4/m Var_j[g_j],
///   f_i = mean_{i' != i} k(x_i, x_i') - mean_j k(x_i, y_j),
///   g_j = mean_{j' != j} k(y_j, y_j') - mean_i k(x_i, y_j),
/// with sample variances (denominator n-1, m-1). It is quadratic time, uses
/// the same kernel matrices as the estimator, and is nonnegative by
/// construction. It is the unequal-size form of the h-statistic variance
/// used by deep-kernel test-power optimization; swap it here if a different
/// estimator is wanted.
struct MmdTerms {
  Eigen::MatrixXd kxx, kyy, kxy;
  Eigen::VectorXd row_xx;  // sum_{i'} kxx(i, i'), diagonal included
  Eigen::VectorXd col_yy;
  Eigen::VectorXd row_xy;  // sum_j kxy(i, j)
  Eigen::VectorXd col_xy;  // sum_i kxy(i, j)
  Eigen::VectorXd f, g;
  double f_mean = 0.0, g_mean = 0.0;
  double mmd_sq = 0.0;
  double variance = 0.0;
  Eigen::Index n = 0, m = 0;
};

inline double sample_variance(const Eigen::VectorXd& v, double mean) {
  const Eigen::VectorXd centered_sq = (v.array() - mean).square().matrix();
  return pairwise_sum(centered_sq) / static_cast<double>(v.size() - 1);
}

inline MmdTerms compute_terms(Eigen::MatrixXd kxx, Eigen::MatrixXd kyy, Eigen::MatrixXd kxy, bool with_variance) {
  MmdTerms t;
  t.n = kxx.rows();
  t.m = kyy.rows();
  t.kxx = std::move(kxx);
  t.kyy = std::move(kyy);
  t.kxy = std::move(kxy);
  const double n = static_cast<double>(t.n);
  const double m = static_cast<double>(t.m);

  // kxx and kyy are exactly symmetric, so column sums are row sums.
  t.row_xx = column_sums(t.kxx);
  t.col_yy = column_sums(t.kyy);
  t.row_xy = row_sums(t.kxy);
  t.col_xy = column_sums(t.kxy);

  const Eigen::VectorXd off_xx = t.row_xx - t.kxx.diagonal();
  const Eigen::VectorXd off_yy = t.col_yy - t.kyy.diagonal();
  const double within_x = pairwise_sum(off_xx) / (n * (n - 1.0));
  const double within_y = pairwise_sum(off_yy) / (m * (m - 1.0));
  // Both reduction orders of the cross block are averaged so that swapping
  // the samples gives a bit-identical estimate.
  const double cross = 0.5 * (pairwise_sum(t.row_xy) + pairwise_sum(t.col_xy));
  t.mmd_sq = (within_x + within_y) - 2.0 * cross / (n * m);

  if (with_variance) {
    t.f = off_xx / (n - 1.0) - t.row_xy / m;
    t.g = off_yy / (m - 1.0) - t.col_xy / n;
    t.f_mean = pairwise_sum(t.f) / n;
    t.g_mean = pairwise_sum(t.g) / m;
    const double var = (4.0 / n) * sample_variance(t.f, t.f_mean) + (4.0 / m) * sample_variance(t.g, t.g_mean);
    t.variance = std::max(var, 0.0);
  }
  return t;
}

inline MmdTerms compute_terms(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const ArdKernelParams& params,
                              bool with_variance) {
  detail::check_samples(x, y, params);
  return compute_terms(kernel_matrix(x, params), kernel_matrix(y, params), kernel_matrix(x, y, params), with_variance);
}

}  // namespace detail

/// Unbiased MMD^2 with ARD kernel; may be negative.
inline double mmd_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const ArdKernelParams& params) {
  detail::require_samples(x.rows(), y.rows(), 2, "mmd_unbiased");
  params.validate();
  return detail::compute_terms(x, y, params, false).mmd_sq;
}

/// Empirical variance estimate of the unbiased MMD^2; see detail::MmdTerms.
inline double mmd_variance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const ArdKernelParams& params) {
  detail::require_samples(x.rows(), y.rows(), 4, "mmd_variance");
  params.validate();
  return detail::compute_terms(x, y, params, true).variance;
}

inline MmdEstimate estimate_from_terms(const detail::MmdTerms& t) {
  return MmdEstimate{t.mmd_sq, t.variance, t.mmd_sq / std::sqrt(t.variance + kRatioStabilizer), t.n, t.m};
}

/// MMD^2 / sqrt(V + C), the test-power surrogate.
inline MmdEstimate ratio_statistic(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const ArdKernelParams& params) {
  detail::require_samples(x.rows(), y.rows(), 4, "ratio_statistic");
  params.validate();
  return estimate_from_terms(detail::compute_terms(x, y, params, true));
}

}  // namespace mmdsense
