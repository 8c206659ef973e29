#pragma once

#include "mmdsense/error.hpp"
#include "mmdsense/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mmdsense {

enum class EmbeddingFormat { word2vec_text, tsv };

inline std::string_view to_string(EmbeddingFormat format) noexcept {
  return format == EmbeddingFormat::tsv ? "tsv" : "word2vec_text";
}

inline EmbeddingFormat parse_embedding_format(std::string_view name) {
  if (name == "word2vec_text" || name == "word2vec" || name == "text") return EmbeddingFormat::word2vec_text;
  if (name == "tsv") return EmbeddingFormat::tsv;
  throw Error(ErrorCode::invalid_config, "unknown embedding format '" + std::string(name) + "'");
}

/// Word vectors of one time period. Row i of the matrix belongs to vocab[i].
class EmbeddingSnapshot {
 public:
  EmbeddingSnapshot(std::string period_label, std::vector<std::string> vocab, Eigen::MatrixXd matrix)
      : period_label_(std::move(period_label)), vocab_(std::move(vocab)), matrix_(std::move(matrix)) {
    if (static_cast<Eigen::Index>(vocab_.size()) != matrix_.rows()) {
      throw Error(ErrorCode::validation_error, "vocabulary size does not match matrix rows");
    }
    if (matrix_.cols() < 1) throw Error(ErrorCode::validation_error, "embedding dimension must be positive");
    if (vocab_.size() < 2) {
      throw Error(ErrorCode::validation_error,
                  "period '" + period_label_ + "' has fewer than 2 words");
    }
    if (!matrix_.allFinite()) {
      for (Eigen::Index i = 0; i < matrix_.rows(); ++i) {
        if (!matrix_.row(i).allFinite()) {
          throw Error(ErrorCode::validation_error, "non-finite coordinate for word '" + vocab_[static_cast<std::size_t>(i)] + "'");
        }
      }
    }
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      if (!index_.emplace(vocab_[i], static_cast<Eigen::Index>(i)).second) {
        throw Error(ErrorCode::validation_error, "duplicate word '" + vocab_[i] + "'");
      }
    }
  }

  const std::string& period_label() const noexcept { return period_label_; }
  const std::vector<std::string>& vocab() const noexcept { return vocab_; }
  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  Eigen::Index dim() const noexcept { return matrix_.cols(); }
  std::size_t size() const noexcept { return vocab_.size(); }

  std::optional<Eigen::Index> find(std::string_view word) const {
    const auto it = index_.find(word);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  Eigen::VectorXd vector(std::string_view word) const {
    const auto row = find(word);
    if (!row) throw Error(ErrorCode::word_not_found, "'" + std::string(word) + "' not in period '" + period_label_ + "'");
    return matrix_.row(*row).transpose();
  }

 private:
  std::string period_label_;
  std::vector<std::string> vocab_;
  Eigen::MatrixXd matrix_;
  std::map<std::string, Eigen::Index, std::less<>> index_;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  if (delimiter == '\t') {
    std::size_t start = 0;
    for (;;) {
      const std::size_t pos = line.find('\t', start);
      fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return fields;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

inline std::optional<double> parse_real(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline std::optional<std::int64_t> parse_integer(std::string_view text) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline std::string_view trim_line_end(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n' || line.back() == ' ')) line.remove_suffix(1);
  return line;
}

}  // namespace detail

/// Parses a snapshot from a stream. Row order equals line order.
inline EmbeddingSnapshot parse_snapshot(std::istream& in, EmbeddingFormat format, std::string period_label) {
  const char delimiter = format == EmbeddingFormat::tsv ? '\t' : ' ';
  std::vector<std::string> vocab;
  std::vector<double> values;
  std::optional<std::int64_t> declared_count;
  std::optional<Eigen::Index> dim;
  std::string raw;
  std::size_t line_no = 0;
  bool first_content_line = true;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim_line_end(raw);
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line, delimiter);
    if (fields.empty()) continue;

    if (first_content_line && format == EmbeddingFormat::word2vec_text && fields.size() == 2) {
      const auto count = detail::parse_integer(fields[0]);
      const auto declared_dim = detail::parse_integer(fields[1]);
      if (count && declared_dim) {
        if (*count < 0 || *declared_dim <= 0) {
          throw Error(ErrorCode::parse_error, "line 1: invalid header");
        }
        declared_count = *count;
        dim = static_cast<Eigen::Index>(*declared_dim);
        first_content_line = false;
        continue;
      }
    }
    first_content_line = false;

    if (fields.size() < 2 || fields[0].empty()) {
      throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": expected a word followed by coordinates");
    }
    const auto row_dim = static_cast<Eigen::Index>(fields.size() - 1);
    if (!dim) dim = row_dim;
    if (row_dim != *dim) {
      throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": expected " + std::to_string(*dim) +
                                              " coordinates, found " + std::to_string(row_dim));
    }
    for (std::size_t f = 1; f < fields.size(); ++f) {
      const auto value = detail::parse_real(fields[f]);
      if (!value) {
        throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": malformed number '" +
                                                std::string(fields[f]) + "'");
      }
      if (!std::isfinite(*value)) {
        throw Error(ErrorCode::validation_error, "line " + std::to_string(line_no) + ": non-finite coordinate");
      }
      values.push_back(*value);
    }
    vocab.emplace_back(fields[0]);
  }

  if (!dim) throw Error(ErrorCode::parse_error, "no embedding rows found");
  if (declared_count && *declared_count != static_cast<std::int64_t>(vocab.size())) {
    throw Error(ErrorCode::parse_error, "header declares " + std::to_string(*declared_count) + " rows, found " +
                                            std::to_string(vocab.size()));
  }
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(vocab.size()), *dim);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index d = 0; d < *dim; ++d) {
      matrix(i, d) = values[static_cast<std::size_t>(i * *dim + d)];
    }
  }
  return EmbeddingSnapshot(std::move(period_label), std::move(vocab), std::move(matrix));
}

/// Loads one period file; the period label defaults to the file stem.
inline EmbeddingSnapshot load_snapshot(const std::filesystem::path& path, EmbeddingFormat format,
                                       std::optional<std::string> period_label = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  try {
    return parse_snapshot(in, format, period_label.value_or(path.stem().string()));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + std::string(e.what()));
  }
}

/// Writes a snapshot in `format`; word2vec text gets a "count dim" header.
/// Coordinates use the shortest round-trip representation, so parsing the
/// output restores the matrix exactly.
inline void write_snapshot(std::ostream& out, const EmbeddingSnapshot& snapshot, EmbeddingFormat format) {
  const char delimiter = format == EmbeddingFormat::tsv ? '\t' : ' ';
  if (format == EmbeddingFormat::word2vec_text) out << snapshot.size() << ' ' << snapshot.dim() << '\n';
  char buffer[32];
  for (Eigen::Index i = 0; i < snapshot.matrix().rows(); ++i) {
    out << snapshot.vocab()[static_cast<std::size_t>(i)];
    for (Eigen::Index d = 0; d < snapshot.dim(); ++d) {
      const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), snapshot.matrix()(i, d));
      out << delimiter << std::string_view(buffer, static_cast<std::size_t>(end - buffer));
    }
    out << '\n';
  }
}

/// All periods restricted to the words they share.
class AlignedCorpus {
 public:
  AlignedCorpus(std::vector<EmbeddingSnapshot> periods, std::vector<std::string> shared_vocab,
                std::vector<std::size_t> dropped_per_period)
      : periods_(std::move(periods)),
        shared_vocab_(std::move(shared_vocab)),
        dropped_(std::move(dropped_per_period)) {}

  std::size_t num_periods() const noexcept { return periods_.size(); }
  Eigen::Index dim() const noexcept { return periods_.front().dim(); }
  const std::vector<EmbeddingSnapshot>& periods() const noexcept { return periods_; }
  const EmbeddingSnapshot& period(std::size_t t) const { return periods_.at(t); }
  const std::vector<std::string>& shared_vocab() const noexcept { return shared_vocab_; }
  /// Words of each period that were not shared by every other period.
  const std::vector<std::size_t>& dropped_per_period() const noexcept { return dropped_; }

  std::vector<std::string> period_labels() const {
    std::vector<std::string> labels;
    labels.reserve(periods_.size());
    for (const auto& p : periods_) labels.push_back(p.period_label());
    return labels;
  }

  bool contains(std::string_view word) const {
    return std::binary_search(shared_vocab_.begin(), shared_vocab_.end(), word,
                              [](std::string_view a, std::string_view b) { return a < b; });
  }

  /// Gathers the rows of `words` in period t, in the order given.
  Eigen::MatrixXd rows(std::size_t t, const std::vector<std::string>& words) const {
    const auto& snapshot = period(t);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(words.size()), snapshot.dim());
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto row = snapshot.find(words[i]);
      if (!row) throw Error(ErrorCode::word_not_found, "'" + words[i] + "' not in period '" + snapshot.period_label() + "'");
      out.row(static_cast<Eigen::Index>(i)) = snapshot.matrix().row(*row);
    }
    return out;
  }

  /// Restricts the shared vocabulary to the allowlisted words.
  AlignedCorpus with_allowlist(const std::vector<std::string>& allowlist) const {
    const std::set<std::string, std::less<>> allowed(allowlist.begin(), allowlist.end());
    std::vector<std::string> kept;
    for (const auto& w : shared_vocab_) {
      if (allowed.contains(w)) kept.push_back(w);
    }
    if (kept.empty()) throw Error(ErrorCode::empty_shared_vocab, "no shared word survives the allowlist");
    return AlignedCorpus(periods_, std::move(kept), dropped_);
  }

 private:
  std::vector<EmbeddingSnapshot> periods_;
  std::vector<std::string> shared_vocab_;
  std::vector<std::size_t> dropped_;
};

/// Intersects vocabularies across all periods; the shared vocabulary is
/// sorted lexicographically.
inline AlignedCorpus align(std::vector<EmbeddingSnapshot> snapshots) {
  if (snapshots.size() < 2) throw Error(ErrorCode::validation_error, "at least two periods are required");
  const Eigen::Index dim = snapshots.front().dim();
  for (const auto& s : snapshots) {
    if (s.dim() != dim) {
      throw Error(ErrorCode::dimension_mismatch, "period '" + s.period_label() + "' has dimension " +
                                                     std::to_string(s.dim()) + ", expected " + std::to_string(dim));
    }
  }
  std::vector<std::string> shared = snapshots.front().vocab();
  std::sort(shared.begin(), shared.end());
  for (std::size_t t = 1; t < snapshots.size(); ++t) {
    std::vector<std::string> next;
    next.reserve(shared.size());
    for (auto& w : shared) {
      if (snapshots[t].find(w)) next.push_back(std::move(w));
    }
    shared = std::move(next);
  }
  if (shared.empty()) throw Error(ErrorCode::empty_shared_vocab, "periods share no words");
  std::vector<std::size_t> dropped;
  dropped.reserve(snapshots.size());
  for (const auto& s : snapshots) dropped.push_back(s.size() - shared.size());
  return AlignedCorpus(std::move(snapshots), std::move(shared), std::move(dropped));
}

struct VocabSplit {
  std::vector<std::string> train_words;
  std::vector<std::string> test_words;
  std::uint64_t seed = 0;
};

/// Draws disjoint train/test word sets uniformly from the shared vocabulary.
inline VocabSplit split_vocab(const AlignedCorpus& corpus, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  const auto& shared = corpus.shared_vocab();
  if (n_train + n_test > shared.size()) {
    throw Error(ErrorCode::insufficient_vocab, "requested " + std::to_string(n_train) + " train + " +
                                                   std::to_string(n_test) + " test words, only " +
                                                   std::to_string(shared.size()) + " shared");
  }
  std::vector<std::size_t> order(shared.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  VocabSplit split;
  split.seed = seed;
  split.train_words.reserve(n_train);
  split.test_words.reserve(n_test);
  for (std::size_t i = 0; i < n_train; ++i) split.train_words.push_back(shared[order[i]]);
  for (std::size_t i = n_train; i < n_train + n_test; ++i) split.test_words.push_back(shared[order[i]]);
  return split;
}

/// One word per line; blank lines ignored.
inline std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto trimmed = detail::trim_line_end(line);
    if (!trimmed.empty()) words.emplace_back(trimmed);
  }
  return words;
}

}  // namespace mmdsense
