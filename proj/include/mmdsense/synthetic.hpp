#pragma once

#include "mmdsense/embedding_store.hpp"
#include "mmdsense/error.hpp"
#include "mmdsense/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace mmdsense {

/// Gaussian word embeddings with mean shifts injected into chosen periods.
///
/// Word v in period t is sqrt(p) * b_v + sqrt(1 - p) * e_{v,t} (+ shift),
/// with b_v, e_{v,t} standard normal and p the persistence, so every period
/// is marginally N(shift, I). The shift (magnitude on each shift dimension)
/// applies to a fraction of the words in each shifted period.
struct SynthSpec {
  std::size_t periods = 2;
  Eigen::Index dim = 20;
  std::size_t words = 500;
  std::vector<Eigen::Index> shift_dims{0, 1, 2};
  std::vector<std::size_t> shift_periods;  // empty: the last period
  double magnitude = 1.0;
  double word_fraction = 1.0;
  double persistence = 0.0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> effective_shift_periods() const {
    if (!shift_periods.empty()) return shift_periods;
    return {periods - 1};
  }

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_config, msg); };
    if (periods < 2) fail("synthetic corpus needs at least 2 periods");
    if (dim < 1) fail("dim must be positive");
    if (words < 2) fail("synthetic corpus needs at least 2 words");
    for (auto d : shift_dims) {
      if (d < 0 || d >= dim) fail("shift dimension " + std::to_string(d) + " out of range");
    }
    for (auto t : shift_periods) {
      if (t >= periods) fail("shift period " + std::to_string(t) + " out of range");
    }
    if (!std::isfinite(magnitude)) fail("magnitude must be finite");
    if (!(word_fraction >= 0.0 && word_fraction <= 1.0)) fail("word_fraction must be in [0, 1]");
    if (!(persistence >= 0.0 && persistence <= 1.0)) fail("persistence must be in [0, 1]");
  }
};

struct SyntheticPairTruth {
  std::size_t period_a = 0;
  std::size_t period_b = 0;
  std::vector<Eigen::Index> shifted_dims;
};

struct SyntheticCorpus {
  std::vector<EmbeddingSnapshot> snapshots;
  std::vector<std::string> shifted_words;  // sorted
  std::vector<std::size_t> shift_periods;
  std::vector<SyntheticPairTruth> pairs;
};

inline std::string zero_padded(std::size_t value, std::size_t count) {
  std::size_t width = 1;
  for (std::size_t c = count > 0 ? count - 1 : 0; c >= 10; c /= 10) ++width;
  std::string digits = std::to_string(value);
  return std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

inline SyntheticCorpus generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto n_words = static_cast<Eigen::Index>(spec.words);

  std::vector<std::string> vocab;
  vocab.reserve(spec.words);
  for (std::size_t v = 0; v < spec.words; ++v) vocab.push_back("w" + zero_padded(v, spec.words));

  std::vector<std::size_t> order(spec.words);
  for (std::size_t v = 0; v < spec.words; ++v) order[v] = v;
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_shifted = static_cast<std::size_t>(std::llround(spec.word_fraction * static_cast<double>(spec.words)));
  std::vector<bool> is_shifted(spec.words, false);
  for (std::size_t i = 0; i < n_shifted; ++i) is_shifted[order[i]] = true;

  Eigen::MatrixXd base(n_words, spec.dim);
  for (Eigen::Index v = 0; v < n_words; ++v) {
    for (Eigen::Index d = 0; d < spec.dim; ++d) base(v, d) = rng.normal();
  }

  const auto shift_periods = spec.effective_shift_periods();
  const std::set<std::size_t> shifted_period_set(shift_periods.begin(), shift_periods.end());
  const double keep = std::sqrt(spec.persistence);
  const double fresh = std::sqrt(1.0 - spec.persistence);

  SyntheticCorpus corpus;
  corpus.shift_periods.assign(shifted_period_set.begin(), shifted_period_set.end());
  for (std::size_t t = 0; t < spec.periods; ++t) {
    Eigen::MatrixXd m(n_words, spec.dim);
    for (Eigen::Index v = 0; v < n_words; ++v) {
      for (Eigen::Index d = 0; d < spec.dim; ++d) m(v, d) = keep * base(v, d) + fresh * rng.normal();
    }
    if (shifted_period_set.contains(t)) {
      for (Eigen::Index v = 0; v < n_words; ++v) {
        if (!is_shifted[static_cast<std::size_t>(v)]) continue;
        for (auto d : spec.shift_dims) m(v, d) += spec.magnitude;
      }
    }
    corpus.snapshots.emplace_back("period_" + zero_padded(t, spec.periods), vocab, std::move(m));
  }

  for (std::size_t v = 0; v < spec.words; ++v) {
    if (is_shifted[v]) corpus.shifted_words.push_back(vocab[v]);
  }
  std::vector<Eigen::Index> dims(spec.shift_dims.begin(), spec.shift_dims.end());
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  const bool any_shift = spec.magnitude != 0.0 && n_shifted > 0;
  for (std::size_t a = 0; a < spec.periods; ++a) {
    for (std::size_t b = a + 1; b < spec.periods; ++b) {
      SyntheticPairTruth truth{a, b, {}};
      if (any_shift && shifted_period_set.contains(a) != shifted_period_set.contains(b)) truth.shifted_dims = dims;
      corpus.pairs.push_back(std::move(truth));
    }
  }
  return corpus;
}

}  // namespace mmdsense
