#pragma once

#include "mmdsense/embedding_store.hpp"
#include "mmdsense/error.hpp"
#include "mmdsense/parallel.hpp"
#include "mmdsense/permutation_test.hpp"
#include "mmdsense/random.hpp"
#include "mmdsense/variable_selection.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmdsense {

struct TestConfig {
  std::size_t n_permutations = kDefaultPermutations;
  std::uint64_t seed = 0;
  BandwidthMode bandwidth_mode = BandwidthMode::median;
};

enum class PairStatus { ok, empty_selection, all_runs_rejected, failed };

inline std::string_view to_string(PairStatus status) noexcept {
  switch (status) {
    case PairStatus::ok: return "ok";
    case PairStatus::empty_selection: return "empty_selection";
    case PairStatus::all_runs_rejected: return "all_runs_rejected";
    case PairStatus::failed: return "failed";
  }
  return "failed";
}

inline PairStatus parse_pair_status(std::string_view name) {
  for (auto s : {PairStatus::ok, PairStatus::empty_selection, PairStatus::all_runs_rejected, PairStatus::failed}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::parse_error, "unknown pair status '" + std::string(name) + "'");
}

/// One unordered period pair, period_a < period_b.
struct PairAnalysis {
  std::size_t period_a = 0;
  std::size_t period_b = 0;
  std::string label_a;
  std::string label_b;
  std::vector<Eigen::Index> selected_vars;
  std::size_t n_selected = 0;
  std::optional<double> p_value;  // empty: undefined
  std::optional<double> observed_stat;
  std::vector<double> stability;
  std::size_t kept_runs = 0;
  std::size_t total_runs = 0;
  PairStatus status = PairStatus::failed;
  std::string error;
};

inline std::size_t pair_count(std::size_t periods) noexcept { return periods * (periods - 1) / 2; }

/// Position of (a, b), a < b, in the row-major upper-triangle order.
inline std::size_t pair_index(std::size_t a, std::size_t b, std::size_t periods) noexcept {
  return a * periods - a * (a + 1) / 2 + (b - a - 1);
}

/// Variable selection on the training words, then the permutation test on
/// the test words. Seeds are derived from the pair's periods, so the result
/// does not depend on which other pairs run or in which order.
inline PairAnalysis analyze_pair(const AlignedCorpus& corpus, const VocabSplit& split, std::size_t a, std::size_t b,
                                 const OptimizerConfig& optimizer, const TestConfig& test) {
  if (a > b) std::swap(a, b);
  if (a == b || b >= corpus.num_periods()) throw Error(ErrorCode::validation_error, "invalid period pair");
  PairAnalysis out;
  out.period_a = a;
  out.period_b = b;
  out.label_a = corpus.period(a).period_label();
  out.label_b = corpus.period(b).period_label();
  const auto stream = static_cast<std::uint64_t>(a * corpus.num_periods() + b);
  try {
    OptimizerConfig pair_optimizer = optimizer;
    pair_optimizer.seed = derive_seed(optimizer.seed, stream, 0);
    const SelectionResult sel =
        select_variables(corpus.rows(a, split.train_words), corpus.rows(b, split.train_words), pair_optimizer);
    out.selected_vars = sel.selected;
    out.n_selected = sel.selected.size();
    out.stability.assign(sel.stability.data(), sel.stability.data() + sel.stability.size());
    out.kept_runs = sel.kept_runs;
    out.total_runs = sel.runs.size();
    if (sel.selected.empty()) {
      out.status = PairStatus::empty_selection;
      return out;
    }
    PermutationTestOptions options;
    options.bandwidth_mode = test.bandwidth_mode;
    options.keep_null_stats = false;
    const auto result = permutation_test(corpus.rows(a, split.test_words), corpus.rows(b, split.test_words),
                                         sel.selected, test.n_permutations, derive_seed(test.seed, stream, 1), options);
    out.p_value = result.p_value;
    out.observed_stat = result.observed_stat;
    out.status = PairStatus::ok;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::all_runs_rejected) {
      out.status = PairStatus::all_runs_rejected;
      out.total_runs = optimizer.lambda_grid.size() * static_cast<std::size_t>(optimizer.cv_folds);
    } else {
      out.status = PairStatus::failed;
    }
    out.error = e.what();
  }
  return out;
}

/// All C(T, 2) pairs, in row-major upper-triangle order.
inline std::vector<PairAnalysis> analyze_all_pairs(const AlignedCorpus& corpus, const VocabSplit& split,
                                                   const OptimizerConfig& optimizer, const TestConfig& test,
                                                   unsigned jobs = 1) {
  optimizer.validate();
  const std::size_t periods = corpus.num_periods();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < periods; ++a) {
    for (std::size_t b = a + 1; b < periods; ++b) pairs.emplace_back(a, b);
  }
  std::vector<PairAnalysis> out(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    out[i] = analyze_pair(corpus, split, pairs[i].first, pairs[i].second, optimizer, test);
  });
  return out;
}

/// 1 - cos(u, v), clamped to [0, 2]. A zero-norm argument yields 1 and sets
/// `degenerate`.
template <class DerivedU, class DerivedV>
double cosine_distance_term(const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedV>& v,
                            bool* degenerate = nullptr) {
  if (u.size() != v.size() || u.size() == 0) {
    throw Error(ErrorCode::dimension_mismatch, "cosine distance needs two vectors of the same positive length");
  }
  // One loop for all three products, so u == v gives uv == uu == vv exactly
  // and sqrt(uu * uu) == uu: identical vectors score exactly 0.
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    uu += u(i) * u(i);
    vv += v(i) * v(i);
    uv += u(i) * v(i);
  }
  if (degenerate) *degenerate = false;
  if (uu == 0.0 || vv == 0.0) {
    if (degenerate) *degenerate = true;
    return 1.0;
  }
  return std::clamp(1.0 - uv / std::sqrt(uu * vv), 0.0, 2.0);
}

/// How a pair whose selected set is empty enters a word score.
///  zero:    the pair contributes a term of 0 and still counts towards T'.
///  exclude: the pair is dropped and T' shrinks.
enum class EmptySelectionPolicy { zero, exclude };

inline std::string_view to_string(EmptySelectionPolicy policy) noexcept {
  return policy == EmptySelectionPolicy::exclude ? "exclude" : "zero";
}

inline EmptySelectionPolicy parse_empty_selection_policy(std::string_view name) {
  if (name == "zero") return EmptySelectionPolicy::zero;
  if (name == "exclude") return EmptySelectionPolicy::exclude;
  throw Error(ErrorCode::invalid_config, "unknown empty-selection policy '" + std::string(name) + "'");
}

struct ScoreValue {
  std::optional<double> value;  // empty: no pair contributes
  std::size_t terms = 0;
  std::size_t degenerate_terms = 0;
};

struct PairTerm {
  std::size_t other_period = 0;
  double term = 0.0;
};

struct WordScoreSeries {
  std::string word;
  std::vector<std::string> period_labels;
  std::vector<std::optional<double>> scores;
  std::vector<std::vector<PairTerm>> per_pair_terms;  // indexed by period
  std::size_t degenerate_terms = 0;
};

struct RankedWord {
  std::string word;
  double score = 0.0;
};

/// Global-time word scores over completed pair analyses. Holds references
/// to the corpus and the pair list; both must outlive the scorer.
class SenseScorer {
 public:
  SenseScorer(const AlignedCorpus& corpus, const std::vector<PairAnalysis>& pairs,
              EmptySelectionPolicy policy = EmptySelectionPolicy::zero)
      : corpus_(corpus), pairs_(pairs), policy_(policy) {
    const std::size_t periods = corpus.num_periods();
    lookup_.assign(periods * periods, kMissing);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      if (p.period_a >= periods || p.period_b >= periods || p.period_a == p.period_b) {
        throw Error(ErrorCode::validation_error, "pair record references an invalid period");
      }
      for (auto d : p.selected_vars) {
        if (d < 0 || d >= corpus.dim()) throw Error(ErrorCode::validation_error, "pair record selects an invalid variable");
      }
      lookup_[p.period_a * periods + p.period_b] = i;
      lookup_[p.period_b * periods + p.period_a] = i;
    }
  }

  EmptySelectionPolicy policy() const noexcept { return policy_; }

  /// The (t, t') term for `word`, or nothing when the pair does not count.
  std::optional<double> pair_term(std::string_view word, std::size_t t, std::size_t other,
                                  bool* degenerate = nullptr) const {
    if (degenerate) *degenerate = false;
    const std::size_t slot = lookup_.at(t * corpus_.num_periods() + other);
    if (slot == kMissing) return std::nullopt;
    const PairAnalysis& p = pairs_[slot];
    if (p.selected_vars.empty()) {
      if (p.status == PairStatus::failed || policy_ == EmptySelectionPolicy::exclude) return std::nullopt;
      return 0.0;
    }
    const Eigen::VectorXd first = corpus_.period(p.period_a).vector(word);
    const Eigen::VectorXd second = corpus_.period(p.period_b).vector(word);
    const auto count = static_cast<Eigen::Index>(p.selected_vars.size());
    Eigen::VectorXd u(count), v(count);
    for (Eigen::Index k = 0; k < count; ++k) {
      u(k) = first(p.selected_vars[static_cast<std::size_t>(k)]);
      v(k) = second(p.selected_vars[static_cast<std::size_t>(k)]);
    }
    return cosine_distance_term(u, v, degenerate);
  }

  ScoreValue score(std::string_view word, std::size_t t) const {
    require_word(word);
    if (t >= corpus_.num_periods()) throw Error(ErrorCode::validation_error, "period index out of range");
    ScoreValue out;
    double total = 0.0;
    for (std::size_t other = 0; other < corpus_.num_periods(); ++other) {
      if (other == t) continue;
      bool degenerate = false;
      const auto term = pair_term(word, t, other, &degenerate);
      if (!term) continue;
      total += *term;
      ++out.terms;
      if (degenerate) ++out.degenerate_terms;
    }
    if (out.terms > 0) out.value = std::clamp(total / static_cast<double>(out.terms), 0.0, 2.0);
    return out;
  }

  WordScoreSeries series(std::string_view word) const {
    require_word(word);
    WordScoreSeries out;
    out.word = std::string(word);
    out.period_labels = corpus_.period_labels();
    out.per_pair_terms.resize(corpus_.num_periods());
    for (std::size_t t = 0; t < corpus_.num_periods(); ++t) {
      const ScoreValue s = score(word, t);
      out.scores.push_back(s.value);
      out.degenerate_terms += s.degenerate_terms;
      for (std::size_t other = 0; other < corpus_.num_periods(); ++other) {
        if (other == t) continue;
        if (const auto term = pair_term(word, t, other)) out.per_pair_terms[t].push_back({other, *term});
      }
    }
    return out;
  }

  /// Scores of every shared word at period t, in shared-vocabulary order.
  std::vector<ScoreValue> period_scores(std::size_t t) const {
    std::vector<ScoreValue> out;
    out.reserve(corpus_.shared_vocab().size());
    for (const auto& w : corpus_.shared_vocab()) out.push_back(score(w, t));
    return out;
  }

  /// Top k words at period t by descending score, ties by word. Words with
  /// an undefined score are not ranked.
  std::vector<RankedWord> rank_words(std::size_t t, std::size_t k) const {
    const auto scores = period_scores(t);
    std::vector<RankedWord> ranked;
    const auto& vocab = corpus_.shared_vocab();
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (scores[i].value) ranked.push_back({vocab[i], *scores[i].value});
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedWord& x, const RankedWord& y) {
      if (x.score != y.score) return x.score > y.score;
      return x.word < y.word;
    });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
  }

 private:
  static constexpr std::size_t kMissing = static_cast<std::size_t>(-1);

  void require_word(std::string_view word) const {
    if (!corpus_.contains(word)) throw Error(ErrorCode::word_not_found, "'" + std::string(word) + "' is not in the shared vocabulary");
  }

  const AlignedCorpus& corpus_;
  const std::vector<PairAnalysis>& pairs_;
  EmptySelectionPolicy policy_;
  std::vector<std::size_t> lookup_;
};

}  // namespace mmdsense
