#pragma once

#include "mmdsense/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace mmdsense {

enum class BandwidthMode { median, mean };

inline std::string_view to_string(BandwidthMode mode) noexcept {
  return mode == BandwidthMode::mean ? "mean" : "median";
}

inline BandwidthMode parse_bandwidth_mode(std::string_view name) {
  if (name == "median") return BandwidthMode::median;
  if (name == "mean") return BandwidthMode::mean;
  throw Error(ErrorCode::invalid_config, "unknown bandwidth mode '" + std::string(name) + "'");
}

/// Per-dimension ARD weights a_d and bandwidths gamma_d.
struct ArdKernelParams {
  Eigen::VectorXd weights;
  Eigen::VectorXd bandwidths;

  Eigen::Index dim() const noexcept { return bandwidths.size(); }

  static ArdKernelParams unit_weights(Eigen::VectorXd bandwidths) {
    ArdKernelParams p{Eigen::VectorXd::Ones(bandwidths.size()), std::move(bandwidths)};
    p.validate();
    return p;
  }

  void validate() const {
    if (weights.size() != bandwidths.size() || bandwidths.size() == 0) {
      throw Error(ErrorCode::dimension_mismatch, "weights and bandwidths must have the same positive length");
    }
    for (Eigen::Index d = 0; d < bandwidths.size(); ++d) {
      if (!(std::isfinite(bandwidths(d)) && bandwidths(d) > 0.0)) {
        throw Error(ErrorCode::validation_error, "bandwidth " + std::to_string(d) + " must be positive and finite");
      }
      if (!(std::isfinite(weights(d)) && weights(d) >= 0.0)) {
        throw Error(ErrorCode::validation_error, "weight " + std::to_string(d) + " must be nonnegative and finite");
      }
    }
  }
};

/// k(x, y) = exp(-(1/D) sum_d a_d^2 (x_d - y_d)^2 / gamma_d^2)
template <class DerivedX, class DerivedY>
double kernel_value(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
                    const ArdKernelParams& params) {
  const Eigen::Index dim = params.dim();
  if (x.size() != dim || y.size() != dim || params.weights.size() != dim) {
    throw Error(ErrorCode::dimension_mismatch, "kernel inputs do not share dimension " + std::to_string(dim));
  }
  double acc = 0.0;
  for (Eigen::Index d = 0; d < dim; ++d) {
    const double scaled = params.weights(d) * (x(d) - y(d)) / params.bandwidths(d);
    acc += scaled * scaled;
  }
  return std::exp(-acc / static_cast<double>(dim));
}

namespace detail {

/// Column d of the result is column d of `samples` times a_d / gamma_d.
inline Eigen::MatrixXd scale_columns(const Eigen::MatrixXd& samples, const Eigen::VectorXd& factors) {
  return samples * factors.asDiagonal();
}

/// Squared scaled distances accumulated one dimension at a time; dimensions
/// whose factor is zero are skipped. Each output column stays in cache while
/// all dimensions are added to it.
inline Eigen::MatrixXd scaled_sq_distances(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
                                           const Eigen::VectorXd& factors) {
  const Eigen::Index n = xs.rows();
  const Eigen::Index m = ys.rows();
  std::vector<Eigen::Index> active;
  for (Eigen::Index d = 0; d < xs.cols(); ++d) {
    if (factors(d) != 0.0) active.push_back(d);
  }
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double* out = dist.col(j).data();
    for (const Eigen::Index d : active) {
      const double* xc = xs.col(d).data();
      const double yj = ys(j, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = xc[i] - yj;
        out[i] += diff * diff;
      }
    }
  }
  return dist;
}

/// Same as scaled_sq_distances(xs, xs). Entry (i, j) and (j, i) add the same
/// squares in the same order, so the result is exactly symmetric with a zero
/// diagonal.
inline Eigen::MatrixXd scaled_sq_distances_self(const Eigen::MatrixXd& xs, const Eigen::VectorXd& factors) {
  return scaled_sq_distances(xs, xs, factors);
}

inline Eigen::MatrixXd exp_kernel(Eigen::MatrixXd sq_dist, Eigen::Index dim) {
  sq_dist.array() = (sq_dist.array() * (-1.0 / static_cast<double>(dim))).exp();
  return sq_dist;
}

inline void check_samples(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const ArdKernelParams& params) {
  if (x.cols() != params.dim() || y.cols() != params.dim()) {
    throw Error(ErrorCode::dimension_mismatch, "samples have " + std::to_string(x.cols()) + " and " +
                                                   std::to_string(y.cols()) + " columns, kernel expects " +
                                                   std::to_string(params.dim()));
  }
}

}  // namespace detail

/// Gram matrix between the rows of x and the rows of y.
inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const ArdKernelParams& params) {
  detail::check_samples(x, y, params);
  const Eigen::VectorXd factors = params.weights.cwiseQuotient(params.bandwidths);
  return detail::exp_kernel(
      detail::scaled_sq_distances(detail::scale_columns(x, factors), detail::scale_columns(y, factors), factors),
      params.dim());
}

/// Gram matrix of x against itself: symmetric with unit diagonal.
inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const ArdKernelParams& params) {
  detail::check_samples(x, x, params);
  const Eigen::VectorXd factors = params.weights.cwiseQuotient(params.bandwidths);
  return detail::exp_kernel(detail::scaled_sq_distances_self(detail::scale_columns(x, factors), factors), params.dim());
}

struct Bandwidths {
  Eigen::VectorXd values;
  /// Dimensions that were constant in the pooled sample and fell back to 1.
  std::vector<Eigen::Index> fallback_dims;
};

namespace detail {

inline double median_nonzero_distance(std::vector<double> sorted_values) {
  const std::size_t n = sorted_values.size();
  std::vector<double> distances;
  distances.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = sorted_values[j] - sorted_values[i];
      if (dist > 0.0) distances.push_back(dist);
    }
  }
  if (distances.empty()) return 0.0;
  const std::size_t mid = distances.size() / 2;
  std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid), distances.end());
  const double upper = distances[mid];
  if (distances.size() % 2 == 1) return upper;
  const double lower = *std::max_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Mean of nonzero |z_i - z_j| over i < j, in O(n log n) from sorted values.
inline double mean_nonzero_distance(const std::vector<double>& sorted_values) {
  const std::size_t n = sorted_values.size();
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    total += sorted_values[k] * (2.0 * static_cast<double>(k) - static_cast<double>(n - 1));
  }
  double zero_pairs = 0.0;
  for (std::size_t k = 0; k < n;) {
    std::size_t run = k + 1;
    while (run < n && sorted_values[run] == sorted_values[k]) ++run;
    const double c = static_cast<double>(run - k);
    zero_pairs += c * (c - 1.0) / 2.0;
    k = run;
  }
  const double nonzero_pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0 - zero_pairs;
  return nonzero_pairs > 0.0 ? total / nonzero_pairs : 0.0;
}

}  // namespace detail

/// Dimension-wise median (or mean) heuristic over the pooled sample.
inline Bandwidths bandwidth_heuristic(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                      BandwidthMode mode = BandwidthMode::median) {
  if (x.cols() != y.cols()) throw Error(ErrorCode::dimension_mismatch, "samples differ in dimension");
  if (x.rows() + y.rows() < 2) throw Error(ErrorCode::sample_too_small, "bandwidth heuristic needs at least 2 points");
  Bandwidths result;
  result.values.resize(x.cols());
  std::vector<double> pooled(static_cast<std::size_t>(x.rows() + y.rows()));
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) pooled[static_cast<std::size_t>(i)] = x(i, d);
    for (Eigen::Index j = 0; j < y.rows(); ++j) pooled[static_cast<std::size_t>(x.rows() + j)] = y(j, d);
    std::sort(pooled.begin(), pooled.end());
    const double gamma = mode == BandwidthMode::median ? detail::median_nonzero_distance(pooled)
                                                       : detail::mean_nonzero_distance(pooled);
    if (gamma > 0.0 && std::isfinite(gamma)) {
      result.values(d) = gamma;
    } else {
      result.values(d) = 1.0;
      result.fallback_dims.push_back(d);
    }
  }
  return result;
}

}  // namespace mmdsense
