#pragma once

#include "mmdsense/ard_kernel.hpp"
#include "mmdsense/error.hpp"
#include "mmdsense/numeric.hpp"
#include "mmdsense/parallel.hpp"
#include "mmdsense/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace mmdsense {

inline constexpr std::size_t kDefaultPermutations = 500;

struct PermutationTestOptions {
  BandwidthMode bandwidth_mode = BandwidthMode::median;
  bool keep_null_stats = true;
  unsigned jobs = 1;
};

struct PermutationTestResult {
  double p_value = 1.0;
  double observed_stat = 0.0;
  std::size_t n_permutations = 0;
  std::vector<double> null_stats;
  std::vector<Eigen::Index> selected_vars;
  Eigen::VectorXd bandwidths;
  Eigen::Index n_x = 0;
  Eigen::Index n_y = 0;
};

namespace detail {

/// Unbiased MMD^2 between the rows flagged in `in_a` and the rest, from a
/// precomputed pooled Gram matrix. Symmetric in the two groups bit for bit:
/// flipping every flag returns the identical double.
inline double split_mmd(const Eigen::MatrixXd& gram, const std::vector<char>& in_a) {
  const auto size = static_cast<Eigen::Index>(in_a.size());
  Eigen::VectorXd mask_a(size), mask_b(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    mask_a(i) = in_a[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    mask_b(i) = 1.0 - mask_a(i);
  }
  const Eigen::VectorXd to_a = gram * mask_a;
  const Eigen::VectorXd to_b = gram * mask_b;
  std::vector<double> within_a, within_b, a_to_b, b_to_a;
  for (Eigen::Index i = 0; i < size; ++i) {
    if (in_a[static_cast<std::size_t>(i)]) {
      within_a.push_back(to_a(i) - gram(i, i));
      a_to_b.push_back(to_b(i));
    } else {
      within_b.push_back(to_b(i) - gram(i, i));
      b_to_a.push_back(to_a(i));
    }
  }
  const double na = static_cast<double>(within_a.size());
  const double nb = static_cast<double>(within_b.size());
  const double cross = 0.5 * (pairwise_sum(a_to_b) + pairwise_sum(b_to_a));
  return (pairwise_sum(within_a) / (na * (na - 1.0)) + pairwise_sum(within_b) / (nb * (nb - 1.0))) -
         2.0 * cross / (na * nb);
}

}  // namespace detail

/// Permutation test of equal distributions on the coordinates in `selected`.
///
/// Both samples are projected onto the selected coordinates, bandwidths are
/// recomputed on the pooled projection, and the statistic is the unbiased
/// MMD^2 with unit ARD weights (kernel normalised by |S|). Pooled rows are
/// put in lexicographic order before the seeded relabelings are drawn, so
/// swapping the two samples leaves the p-value unchanged.
inline PermutationTestResult permutation_test(const Eigen::MatrixXd& x_test, const Eigen::MatrixXd& y_test,
                                              const std::vector<Eigen::Index>& selected, std::size_t n_permutations,
                                              std::uint64_t seed, const PermutationTestOptions& options = {}) {
  if (selected.empty()) throw Error(ErrorCode::empty_selection, "permutation test needs at least one selected variable");
  if (x_test.cols() != y_test.cols()) throw Error(ErrorCode::dimension_mismatch, "samples differ in dimension");
  if (x_test.rows() < 2 || y_test.rows() < 2) {
    throw Error(ErrorCode::sample_too_small, "permutation test needs at least 2 samples per side");
  }
  std::vector<Eigen::Index> vars = selected;
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  for (auto d : vars) {
    if (d < 0 || d >= x_test.cols()) throw Error(ErrorCode::validation_error, "selected variable " + std::to_string(d) + " out of range");
  }

  const Eigen::Index n = x_test.rows();
  const Eigen::Index m = y_test.rows();
  const Eigen::Index total = n + m;
  const auto sub_dim = static_cast<Eigen::Index>(vars.size());
  Eigen::MatrixXd pooled(total, sub_dim);
  for (Eigen::Index k = 0; k < sub_dim; ++k) {
    pooled.col(k).head(n) = x_test.col(vars[static_cast<std::size_t>(k)]);
    pooled.col(k).tail(m) = y_test.col(vars[static_cast<std::size_t>(k)]);
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < sub_dim; ++k) {
      if (pooled(a, k) != pooled(b, k)) return pooled(a, k) < pooled(b, k);
    }
    return false;
  });
  Eigen::MatrixXd canonical(total, sub_dim);
  std::vector<char> observed_in_x(static_cast<std::size_t>(total));
  for (Eigen::Index r = 0; r < total; ++r) {
    canonical.row(r) = pooled.row(order[static_cast<std::size_t>(r)]);
    observed_in_x[static_cast<std::size_t>(r)] = order[static_cast<std::size_t>(r)] < n ? 1 : 0;
  }

  PermutationTestResult result;
  result.selected_vars = vars;
  result.n_permutations = n_permutations;
  result.n_x = n;
  result.n_y = m;
  result.bandwidths = bandwidth_heuristic(pooled.topRows(n), pooled.bottomRows(m), options.bandwidth_mode).values;
  const Eigen::MatrixXd gram = kernel_matrix(canonical, ArdKernelParams::unit_weights(result.bandwidths));
  result.observed_stat = detail::split_mmd(gram, observed_in_x);

  // Relabelings are drawn up front so parallel evaluation is deterministic.
  const auto group = static_cast<std::size_t>(std::min(n, m));
  std::vector<std::vector<char>> relabelings(n_permutations, std::vector<char>(static_cast<std::size_t>(total), 0));
  Rng rng(seed);
  std::vector<std::size_t> perm(static_cast<std::size_t>(total));
  for (std::size_t p = 0; p < n_permutations; ++p) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    for (std::size_t i = 0; i < group; ++i) relabelings[p][perm[i]] = 1;
  }
  std::vector<double> null_stats(n_permutations);
  parallel_for(n_permutations, options.jobs, [&](std::size_t p) { null_stats[p] = detail::split_mmd(gram, relabelings[p]); });

  const auto exceed = std::count_if(null_stats.begin(), null_stats.end(),
                                    [&](double s) { return s >= result.observed_stat; });
  result.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(n_permutations));
  if (options.keep_null_stats) result.null_stats = std::move(null_stats);
  return result;
}

}  // namespace mmdsense
