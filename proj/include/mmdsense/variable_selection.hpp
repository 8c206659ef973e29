#pragma once

#include "mmdsense/ard_kernel.hpp"
#include "mmdsense/error.hpp"
#include "mmdsense/mmd_core.hpp"
#include "mmdsense/parallel.hpp"
#include "mmdsense/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mmdsense {

/// Lower bound applied to the ratio inside -log(.).
inline constexpr double kLogFloor = 1e-12;

enum class WeightInit { ones, heuristic_scaled };

inline std::string_view to_string(WeightInit init) noexcept {
  return init == WeightInit::heuristic_scaled ? "heuristic_scaled" : "ones";
}

inline WeightInit parse_weight_init(std::string_view name) {
  if (name == "ones") return WeightInit::ones;
  if (name == "heuristic_scaled") return WeightInit::heuristic_scaled;
  throw Error(ErrorCode::invalid_config, "unknown weight init '" + std::string(name) + "'");
}

/// 8 values log-spaced over [1e-3, 1e1].
inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int k = 0; k < 8; ++k) grid.push_back(std::pow(10.0, -3.0 + 4.0 * k / 7.0));
  return grid;
}

struct OptimizerConfig {
  std::vector<double> lambda_grid = default_lambda_grid();
  int max_iters = 200;
  double step_size = 0.05;
  double step_growth = 2.0;
  double tolerance = 1e-6;
  WeightInit init = WeightInit::ones;
  std::uint64_t seed = 0;
  int cv_folds = 5;
  double selection_threshold = 0.5;
  double weight_cutoff = 1e-3;
  BandwidthMode bandwidth_mode = BandwidthMode::median;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_config, msg); };
    if (lambda_grid.empty()) fail("lambda_grid is empty");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
      if (!(lambda_grid[i] > 0.0) || !std::isfinite(lambda_grid[i])) fail("lambda_grid values must be positive");
      if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) fail("lambda_grid must be strictly ascending");
    }
    if (max_iters < 1) fail("max_iters must be at least 1");
    if (!(step_size > 0.0)) fail("step_size must be positive");
    if (!(step_growth >= 1.0)) fail("step_growth must be at least 1");
    if (!(tolerance >= 0.0)) fail("tolerance must be nonnegative");
    if (cv_folds < 2) fail("cv_folds must be at least 2");
    if (!(selection_threshold > 0.0 && selection_threshold <= 1.0)) fail("selection_threshold must be in (0, 1]");
    if (!(weight_cutoff > 0.0)) fail("weight_cutoff must be positive");
  }
};

namespace detail {

/// -log(max(l, floor)) for the ARD ratio statistic, on data already divided
/// by the bandwidths.
class RatioObjective {
 public:
  struct Evaluation {
    double smooth = 0.0;
    double ratio = 0.0;
    bool floored = false;
    Eigen::VectorXd gradient;  // empty when floored
  };

  RatioObjective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& bandwidths)
      : xs_(x * bandwidths.cwiseInverse().asDiagonal()), ys_(y * bandwidths.cwiseInverse().asDiagonal()) {
    if (x.cols() != bandwidths.size() || y.cols() != bandwidths.size()) {
      throw Error(ErrorCode::dimension_mismatch, "samples and bandwidths differ in dimension");
    }
    require_samples(x.rows(), y.rows(), 4, "ratio objective");
  }

  Eigen::Index dim() const noexcept { return xs_.cols(); }

  Evaluation evaluate(const Eigen::VectorXd& weights, bool want_gradient) const {
    const Eigen::Index dim = this->dim();
    const Eigen::MatrixXd xw = xs_ * weights.asDiagonal();
    const Eigen::MatrixXd yw = ys_ * weights.asDiagonal();
    MmdTerms t = compute_terms(exp_kernel(scaled_sq_distances_self(xw, weights), dim),
                               exp_kernel(scaled_sq_distances_self(yw, weights), dim),
                               exp_kernel(scaled_sq_distances(xw, yw, weights), dim), true);
    Evaluation ev;
    const double denom = t.variance + kRatioStabilizer;
    ev.ratio = t.mmd_sq / std::sqrt(denom);
    if (!(ev.ratio > kLogFloor) || !std::isfinite(ev.ratio)) {
      ev.floored = true;
      ev.smooth = -std::log(kLogFloor);
      return ev;
    }
    ev.smooth = -std::log(ev.ratio);
    if (want_gradient) ev.gradient = gradient_from_terms(t, weights, denom);
    return ev;
  }

 private:
  // d(-log l)/dK = -(1/M) dM/dK + 1/(2(V+C)) dV/dK, contracted against
  // dK/da_d = -2 a_d / D * K * ((u_d - v_d) / gamma_d)^2.
  Eigen::VectorXd gradient_from_terms(const MmdTerms& t, const Eigen::VectorXd& weights, double denom) const {
    const double n = static_cast<double>(t.n);
    const double m = static_cast<double>(t.m);
    const double inv_mmd = 1.0 / t.mmd_sq;
    const double half_inv_var = 0.5 / denom;

    const Eigen::VectorXd phi = (8.0 / (n * (n - 1.0))) * (t.f.array() - t.f_mean).matrix();
    const Eigen::VectorXd psi = (8.0 / (m * (m - 1.0))) * (t.g.array() - t.g_mean).matrix();

    // Row i of the xx block carries f_i's dependence; column j of the yy
    // block carries g_j's.
    Eigen::MatrixXd axx = t.kxx;
    for (Eigen::Index i = 0; i < t.n; ++i) {
      axx.row(i) *= -inv_mmd / (n * (n - 1.0)) + half_inv_var * phi(i) / (n - 1.0);
      axx(i, i) = 0.0;
    }
    Eigen::MatrixXd ayy = t.kyy;
    for (Eigen::Index j = 0; j < t.m; ++j) {
      ayy.col(j) *= -inv_mmd / (m * (m - 1.0)) + half_inv_var * psi(j) / (m - 1.0);
      ayy(j, j) = 0.0;
    }
    Eigen::MatrixXd axy = t.kxy;
    const double cross_coeff = inv_mmd * 2.0 / (n * m);
    for (Eigen::Index j = 0; j < t.m; ++j) {
      for (Eigen::Index i = 0; i < t.n; ++i) {
        axy(i, j) *= cross_coeff - half_inv_var * (phi(i) / m + psi(j) / n);
      }
    }

    std::vector<Eigen::Index> active;
    for (Eigen::Index d = 0; d < dim(); ++d) {
      if (weights(d) != 0.0) active.push_back(d);
    }
    Eigen::VectorXd q = Eigen::VectorXd::Zero(dim());
    accumulate_weighted_sq_diff(axx, xs_, xs_, active, q);
    accumulate_weighted_sq_diff(ayy, ys_, ys_, active, q);
    accumulate_weighted_sq_diff(axy, xs_, ys_, active, q);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim());
    const double d_inv = 1.0 / static_cast<double>(dim());
    for (const Eigen::Index d : active) grad(d) = -2.0 * weights(d) * d_inv * q(d);
    return grad;
  }

  // q_d += sum_ij a(i, j) (u(i, d) - v(j, d))^2 for every active d, one
  // column of `a` at a time. Eight partial sums per column keep the inner
  // loop vectorizable while fixing the summation order.
  static void accumulate_weighted_sq_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                          const std::vector<Eigen::Index>& active, Eigen::VectorXd& q) {
    const Eigen::Index rows = a.rows();
    const Eigen::Index full = rows - rows % 8;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double* col = a.col(j).data();
      for (const Eigen::Index d : active) {
        const double* ud = u.col(d).data();
        const double vj = v(j, d);
        double lanes[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
        for (Eigen::Index i = 0; i < full; i += 8) {
          for (int l = 0; l < 8; ++l) {
            const double diff = ud[i + l] - vj;
            lanes[l] += col[i + l] * diff * diff;
          }
        }
        for (Eigen::Index i = full; i < rows; ++i) {
          const double diff = ud[i] - vj;
          lanes[i - full] += col[i] * diff * diff;
        }
        q(d) += ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
      }
    }
  }

  Eigen::MatrixXd xs_;
  Eigen::MatrixXd ys_;
};

inline double l1_norm(const Eigen::VectorXd& w) { return w.cwiseAbs().sum(); }

}  // namespace detail

/// sign(w) * max(|w| - threshold, 0)
inline double soft_threshold(double w, double threshold) {
  const double shrunk = std::abs(w) - threshold;
  if (shrunk <= 0.0) return 0.0;
  return w < 0.0 ? -shrunk : shrunk;
}

/// Proximal map of threshold * |w| plus the constraint w >= 0.
inline double prox_nonnegative_l1(double w, double threshold) {
  return std::max(soft_threshold(w, threshold), 0.0);
}

/// -log(max(l, 1e-12)) + lambda * sum_d |a_d|
inline double objective(const Eigen::VectorXd& weights, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                        const Eigen::VectorXd& bandwidths, double lambda) {
  if (weights.size() != bandwidths.size()) throw Error(ErrorCode::dimension_mismatch, "weights and bandwidths differ in length");
  const detail::RatioObjective obj(x, y, bandwidths);
  return obj.evaluate(weights, false).smooth + lambda * detail::l1_norm(weights);
}

/// Gradient of -log l with respect to the ARD weights. Throws
/// NonFiniteGradient when the ratio sits at the log floor.
inline Eigen::VectorXd smooth_gradient(const Eigen::VectorXd& weights, const Eigen::MatrixXd& x,
                                       const Eigen::MatrixXd& y, const Eigen::VectorXd& bandwidths) {
  if (weights.size() != bandwidths.size()) throw Error(ErrorCode::dimension_mismatch, "weights and bandwidths differ in length");
  if (!weights.allFinite()) throw Error(ErrorCode::validation_error, "weights must be finite");
  const detail::RatioObjective obj(x, y, bandwidths);
  auto ev = obj.evaluate(weights, true);
  if (ev.floored) {
    throw Error(ErrorCode::non_finite_gradient, "ratio statistic " + std::to_string(ev.ratio) + " is at the log floor");
  }
  return ev.gradient;
}

struct OptimizerDiagnostics {
  int iterations = 0;
  bool converged = false;
  int backtracks = 0;
  bool started_floored = false;
  bool ended_floored = false;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double final_ratio = 0.0;
  std::vector<double> objective_trace;
};

struct OptimizationResult {
  Eigen::VectorXd weights;
  OptimizerDiagnostics diagnostics;
};

/// Starting point for the ARD weights.
inline Eigen::VectorXd initial_weights(WeightInit init, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                       const Eigen::VectorXd& bandwidths) {
  const Eigen::Index dim = bandwidths.size();
  if (init == WeightInit::ones) return Eigen::VectorXd::Ones(dim);
  // Marginal mean and spread discrepancy per dimension, in bandwidth units,
  // rescaled to mean 1.
  const Eigen::VectorXd mx = x.colwise().mean().transpose();
  const Eigen::VectorXd my = y.colwise().mean().transpose();
  const Eigen::VectorXd sx = ((x.rowwise() - mx.transpose()).array().square().colwise().mean()).sqrt().transpose();
  const Eigen::VectorXd sy = ((y.rowwise() - my.transpose()).array().square().colwise().mean()).sqrt().transpose();
  Eigen::VectorXd w = ((mx - my).cwiseAbs() + (sx - sy).cwiseAbs()).cwiseQuotient(bandwidths);
  const double mean = w.mean();
  if (!(mean > 0.0) || !std::isfinite(mean)) return Eigen::VectorXd::Ones(dim);
  return w / mean;
}

/// Proximal gradient descent on the regularized objective with
/// backtracking; every accepted step does not increase the objective.
inline OptimizationResult optimize_one(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                       const Eigen::VectorXd& bandwidths, double lambda, const OptimizerConfig& config) {
  constexpr double kMinStep = 1e-10;
  const detail::RatioObjective obj(x, y, bandwidths);
  const Eigen::Index dim = obj.dim();

  OptimizationResult result;
  auto& diag = result.diagnostics;
  Eigen::VectorXd weights = initial_weights(config.init, x, y, bandwidths);

  auto ev = obj.evaluate(weights, true);
  // On the floor the smooth part is flat.
  Eigen::VectorXd grad = ev.floored ? Eigen::VectorXd::Zero(dim) : ev.gradient;
  double total = ev.smooth + lambda * detail::l1_norm(weights);
  diag.started_floored = ev.floored;
  diag.initial_objective = total;
  diag.objective_trace.push_back(total);

  double trial_step = config.step_size;
  for (int it = 0; it < config.max_iters; ++it) {
    double step = trial_step;
    bool accepted = false;
    Eigen::VectorXd candidate(dim);
    detail::RatioObjective::Evaluation cand_ev;
    double cand_total = 0.0;
    while (step >= kMinStep) {
      for (Eigen::Index d = 0; d < dim; ++d) {
        candidate(d) = prox_nonnegative_l1(weights(d) - step * grad(d), step * lambda);
      }
      if (candidate == weights) break;
      cand_ev = obj.evaluate(candidate, true);
      cand_total = cand_ev.smooth + lambda * detail::l1_norm(candidate);
      if (cand_total <= total) {
        accepted = true;
        break;
      }
      step *= 0.5;
      ++diag.backtracks;
    }
    if (!accepted) {
      diag.converged = true;
      break;
    }
    const double change = total - cand_total;
    trial_step = step * config.step_growth;
    weights = candidate;
    ev = std::move(cand_ev);
    grad = ev.floored ? Eigen::VectorXd::Zero(dim) : ev.gradient;
    total = cand_total;
    diag.objective_trace.push_back(total);
    diag.iterations = it + 1;
    if (change < config.tolerance) {
      diag.converged = true;
      break;
    }
  }
  diag.ended_floored = ev.floored;
  diag.final_objective = total;
  diag.final_ratio = ev.ratio;
  result.weights = std::move(weights);
  return result;
}

/// One (lambda, fold) optimization of the cross-validation aggregation.
struct RunRecord {
  double lambda = 0.0;
  int fold = 0;
  Eigen::VectorXd weights;
  std::vector<Eigen::Index> selected;
  double validation_ratio = 0.0;
  bool kept = false;
  OptimizerDiagnostics diagnostics;
};

struct SelectionResult {
  std::vector<Eigen::Index> selected;
  Eigen::VectorXd stability;
  std::vector<RunRecord> runs;
  Eigen::VectorXd bandwidths;
  std::vector<Eigen::Index> bandwidth_fallback_dims;
  std::size_t kept_runs = 0;
};

namespace detail {

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& source, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = source.row(rows[i]);
  return out;
}

struct FoldSplit {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
};

inline std::vector<FoldSplit> make_folds(Eigen::Index n, int folds, Rng& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(std::span<Eigen::Index>(order));
  std::vector<FoldSplit> out(static_cast<std::size_t>(folds));
  for (int k = 0; k < folds; ++k) {
    const auto begin = static_cast<std::size_t>(n * k / folds);
    const auto end = static_cast<std::size_t>(n * (k + 1) / folds);
    for (std::size_t p = 0; p < order.size(); ++p) {
      (p >= begin && p < end ? out[static_cast<std::size_t>(k)].validation : out[static_cast<std::size_t>(k)].train)
          .push_back(order[p]);
    }
  }
  return out;
}

}  // namespace detail

/// Cross-validation aggregation over the lambda grid. A run is kept when its
/// optimized weights select at least one variable, its training ratio left
/// the log floor, and its validation ratio is positive. The stability of a
/// variable is the fraction of all (lambda, fold) runs that were kept and
/// selected it; discarded runs count as votes against every variable.
inline SelectionResult select_variables(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                                        const OptimizerConfig& config, unsigned jobs = 1) {
  config.validate();
  if (x_train.cols() != y_train.cols()) throw Error(ErrorCode::dimension_mismatch, "samples differ in dimension");
  const Eigen::Index n = x_train.rows();
  const Eigen::Index m = y_train.rows();
  const int folds = config.cv_folds;
  // Every validation fold and every training portion needs 4 rows per side.
  if (n / folds < 4 || m / folds < 4 || n - (n + folds - 1) / folds < 4 || m - (m + folds - 1) / folds < 4) {
    throw Error(ErrorCode::sample_too_small, "cannot form " + std::to_string(folds) + " folds from " +
                                                 std::to_string(n) + " and " + std::to_string(m) + " samples");
  }

  SelectionResult result;
  const Bandwidths bw = bandwidth_heuristic(x_train, y_train, config.bandwidth_mode);
  result.bandwidths = bw.values;
  result.bandwidth_fallback_dims = bw.fallback_dims;

  Rng rng(config.seed);
  const auto x_folds = detail::make_folds(n, folds, rng);
  const auto y_folds = detail::make_folds(m, folds, rng);

  const std::size_t n_runs = config.lambda_grid.size() * static_cast<std::size_t>(folds);
  result.runs.resize(n_runs);
  parallel_for(n_runs, jobs, [&](std::size_t r) {
    const std::size_t l = r / static_cast<std::size_t>(folds);
    const std::size_t k = r % static_cast<std::size_t>(folds);
    RunRecord& run = result.runs[r];
    run.lambda = config.lambda_grid[l];
    run.fold = static_cast<int>(k);
    const Eigen::MatrixXd xtr = detail::gather_rows(x_train, x_folds[k].train);
    const Eigen::MatrixXd ytr = detail::gather_rows(y_train, y_folds[k].train);
    auto opt = optimize_one(xtr, ytr, bw.values, run.lambda, config);
    run.weights = std::move(opt.weights);
    run.diagnostics = std::move(opt.diagnostics);
    for (Eigen::Index d = 0; d < run.weights.size(); ++d) {
      if (run.weights(d) > config.weight_cutoff) run.selected.push_back(d);
    }
    if (run.selected.empty() || run.diagnostics.ended_floored) return;
    const Eigen::MatrixXd xva = detail::gather_rows(x_train, x_folds[k].validation);
    const Eigen::MatrixXd yva = detail::gather_rows(y_train, y_folds[k].validation);
    run.validation_ratio = ratio_statistic(xva, yva, ArdKernelParams{run.weights, bw.values}).ratio;
    run.kept = run.validation_ratio > 0.0;
  });

  const Eigen::Index dim = x_train.cols();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(dim);
  for (const auto& run : result.runs) {
    if (!run.kept) continue;
    ++result.kept_runs;
    for (auto d : run.selected) counts(d) += 1.0;
  }
  if (result.kept_runs == 0) {
    throw Error(ErrorCode::all_runs_rejected, "no (lambda, fold) run reached a positive validation ratio");
  }
  result.stability = counts / static_cast<double>(result.runs.size());
  for (Eigen::Index d = 0; d < dim; ++d) {
    if (result.stability(d) >= config.selection_threshold) result.selected.push_back(d);
  }
  return result;
}

}  // namespace mmdsense
