#include "mmdsense/mmd_core.hpp"
#include "mmdsense/permutation_test.hpp"
#include "test_util.hpp"

#include <catch_amalgamated.hpp>

using namespace mmdsense;
using Catch::Approx;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

Eigen::MatrixXd columns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
  return out;
}

}  // namespace

TEST_CASE("strong shift reaches the minimum attainable p-value") {
  Rng rng(1);
  Eigen::MatrixXd x = mmdsense_test::gaussian(rng, 100, 3);
  Eigen::MatrixXd y = mmdsense_test::gaussian(rng, 100, 3);
  // Shift by 5 bandwidths of the unshifted sample on dimension 0.
  y.col(0).array() += 5.0 * bandwidth_heuristic(x.col(0), x.col(0)).values(0);
  const auto r = permutation_test(x, y, {0}, 500, 7);
  CHECK(r.p_value == 1.0 / 501.0);
  CHECK(r.null_stats.size() == 500);
  for (double s : r.null_stats) CHECK(s < r.observed_stat);
}

TEST_CASE("zero permutations give p = 1") {
  Rng rng(2);
  const auto x = mmdsense_test::gaussian(rng, 10, 2);
  const auto y = mmdsense_test::gaussian(rng, 12, 2, 3.0);
  const auto r = permutation_test(x, y, {0, 1}, 0, 1);
  CHECK(r.p_value == 1.0);
  CHECK(r.n_permutations == 0);
}

TEST_CASE("observed statistic is the unbiased mmd on the projected samples") {
  Rng rng(3);
  const auto x = mmdsense_test::gaussian(rng, 30, 6);
  const auto y = mmdsense_test::gaussian(rng, 25, 6, 0.4);
  const std::vector<Eigen::Index> sel{4, 1};
  const auto r = permutation_test(x, y, sel, 50, 2);
  CHECK(r.selected_vars == std::vector<Eigen::Index>{1, 4});
  const Eigen::MatrixXd xp = columns(x, {1, 4});
  const Eigen::MatrixXd yp = columns(y, {1, 4});
  const auto bw = bandwidth_heuristic(xp, yp).values;
  CHECK(r.bandwidths == bw);
  const double expected = mmdsense_test::naive_mmd(xp, yp, Eigen::VectorXd::Ones(2), bw);
  CHECK(std::abs(r.observed_stat - expected) <= 1e-12);
  CHECK(std::abs(r.observed_stat - mmd_unbiased(xp, yp, ArdKernelParams::unit_weights(bw))) <= 1e-12);
}

TEST_CASE("p-value follows the add-one rule over the null statistics") {
  Rng rng(4);
  const auto x = mmdsense_test::gaussian(rng, 20, 2);
  const auto y = mmdsense_test::gaussian(rng, 20, 2, 0.2);
  const auto r = permutation_test(x, y, {0, 1}, 199, 9);
  std::size_t exceed = 0;
  for (double s : r.null_stats) exceed += s >= r.observed_stat ? 1 : 0;
  CHECK(r.p_value == (1.0 + static_cast<double>(exceed)) / 200.0);
  CHECK(r.p_value > 0.0);
  CHECK(r.p_value <= 1.0);
  CHECK(r.p_value >= 1.0 / 200.0);
}

TEST_CASE("same seed gives the same p-value, jobs do not matter") {
  Rng rng(5);
  const auto x = mmdsense_test::gaussian(rng, 40, 4);
  const auto y = mmdsense_test::gaussian(rng, 35, 4, 0.3);
  PermutationTestOptions threaded;
  threaded.jobs = 4;
  const auto a = permutation_test(x, y, {0, 2}, 300, 11);
  const auto b = permutation_test(x, y, {0, 2}, 300, 11, threaded);
  CHECK(a.p_value == b.p_value);
  CHECK(a.null_stats == b.null_stats);
}

TEST_CASE("swapping the samples leaves the p-value unchanged") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto n = static_cast<Eigen::Index>(5 + rng.below(40));
    const auto m = static_cast<Eigen::Index>(5 + rng.below(40));
    const auto x = mmdsense_test::gaussian(rng, n, 3);
    const auto y = mmdsense_test::gaussian(rng, m, 3, 0.3 * rng.uniform());
    const auto a = permutation_test(x, y, {0, 1, 2}, 200, 100 + static_cast<std::uint64_t>(trial));
    const auto b = permutation_test(y, x, {0, 1, 2}, 200, 100 + static_cast<std::uint64_t>(trial));
    CHECK(a.p_value == b.p_value);
    CHECK(a.observed_stat == b.observed_stat);
    CHECK(a.null_stats == b.null_stats);
  }
}

TEST_CASE("more permutations only change resolution") {
  Rng rng(7);
  Eigen::MatrixXd x = mmdsense_test::gaussian(rng, 50, 1);
  Eigen::MatrixXd y = mmdsense_test::gaussian(rng, 50, 1, 4.0);
  for (std::size_t n_perm : {9u, 99u, 999u}) {
    const auto r = permutation_test(x, y, {0}, n_perm, 3);
    CHECK(r.p_value == 1.0 / static_cast<double>(n_perm + 1));
  }
}

TEST_CASE("null calibration") {
  // Fraction of p <= 0.05 over 200 null tests lies in [0.01, 0.12].
  int rejections = 0;
  for (int s = 0; s < 200; ++s) {
    Rng rng(1000 + static_cast<std::uint64_t>(s));
    const auto x = mmdsense_test::gaussian(rng, 40, 5);
    const auto y = mmdsense_test::gaussian(rng, 40, 5);
    PermutationTestOptions options;
    options.keep_null_stats = false;
    if (permutation_test(x, y, {0, 1, 2, 3, 4}, 200, static_cast<std::uint64_t>(s), options).p_value <= 0.05) ++rejections;
  }
  const double fraction = rejections / 200.0;
  CHECK(fraction >= 0.01);
  CHECK(fraction <= 0.12);
}

TEST_CASE("invalid selections and tiny samples") {
  Rng rng(8);
  const auto x = mmdsense_test::gaussian(rng, 10, 3);
  const Eigen::MatrixXd one = x.topRows(1);
  CHECK(code_of([&] { permutation_test(x, x, {}, 10, 0); }) == ErrorCode::empty_selection);
  CHECK(code_of([&] { permutation_test(x, one, {0}, 10, 0); }) == ErrorCode::sample_too_small);
  CHECK(code_of([&] { permutation_test(x, x, {3}, 10, 0); }) == ErrorCode::validation_error);
}
