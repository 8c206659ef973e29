#pragma once

#include "mmdsense/config.hpp"
#include "mmdsense/embedding_store.hpp"
#include "mmdsense/error.hpp"
#include "mmdsense/sense_analysis.hpp"
#include "mmdsense/serialization.hpp"
#include "mmdsense/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mmdsense {

enum ExitCode : int { exit_ok = 0, exit_user_error = 1, exit_internal_error = 2 };

inline int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::internal:
    case ErrorCode::non_finite_gradient: return exit_internal_error;
    default: return exit_user_error;
  }
}

/// Period files of `format` in `dir`, sorted by filename.
inline std::vector<std::filesystem::path> list_period_files(const std::filesystem::path& dir, EmbeddingFormat format) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::io_error, "input directory '" + dir.string() + "' does not exist");
  std::vector<std::string> extensions =
      format == EmbeddingFormat::tsv ? std::vector<std::string>{".tsv"} : std::vector<std::string>{".txt", ".vec"};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

/// Loads, aligns and (optionally) allowlists the corpus described by `config`.
inline AlignedCorpus load_corpus(const RunConfig& config) {
  const auto files = list_period_files(config.input_dir, config.format);
  if (files.size() < 2) {
    throw Error(ErrorCode::validation_error, "input directory '" + config.input_dir.string() + "' holds " +
                                                 std::to_string(files.size()) + " period files, need at least 2");
  }
  std::vector<std::string> labels;
  if (config.labels) {
    labels = load_word_list(*config.labels);
    if (labels.size() != files.size()) {
      throw Error(ErrorCode::invalid_config, "labels file has " + std::to_string(labels.size()) + " labels for " +
                                                 std::to_string(files.size()) + " period files");
    }
  }
  std::vector<EmbeddingSnapshot> snapshots;
  for (std::size_t t = 0; t < files.size(); ++t) {
    snapshots.push_back(load_snapshot(files[t], config.format,
                                      labels.empty() ? std::nullopt : std::optional<std::string>(labels[t])));
  }
  AlignedCorpus corpus = align(std::move(snapshots));
  if (config.allowlist) corpus = corpus.with_allowlist(load_word_list(*config.allowlist));
  return corpus;
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

/// Up to `k` vocabulary words closest to `word` by edit distance, ties by word.
inline std::vector<std::string> nearest_words(const std::vector<std::string>& vocab, std::string_view word,
                                              std::size_t k) {
  std::vector<std::pair<std::size_t, std::string>> scored;
  scored.reserve(vocab.size());
  for (const auto& w : vocab) scored.emplace_back(edit_distance(word, w), w);
  const auto count = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(count), scored.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(scored[i].second);
  return out;
}

/// Full pipeline. All inputs are loaded and validated before the output
/// directory is touched, so a failing run leaves no partial outputs.
inline int cmd_analyze(const RunConfig& config, std::ostream& log) {
  namespace fs = std::filesystem;
  config.validate_analysis();
  const AlignedCorpus corpus = load_corpus(config);
  const VocabSplit split = split_vocab(corpus, config.n_train, config.n_test, config.split_seed());
  log << "analyze: " << corpus.num_periods() << " periods, " << corpus.shared_vocab().size() << " shared words, dim "
      << corpus.dim() << ", " << pair_count(corpus.num_periods()) << " pairs\n";

  const auto pairs = analyze_all_pairs(corpus, split, config.seeded_optimizer(), config.seeded_test(), config.jobs);
  for (const auto& p : pairs) {
    if (!p.error.empty()) log << "warning: pair " << p.label_a << " / " << p.label_b << ": " << p.error << '\n';
  }

  const SenseScorer scorer(corpus, pairs, config.empty_selection);
  const auto labels = corpus.period_labels();
  fs::create_directories(config.output_dir);
  const fs::path& out = config.output_dir;
  write_json_file(out / "manifest.json",
                  manifest_json("analyze", analysis_key_values(config), config.seed, labels));
  write_json_file(out / "pairs.json", pairs_to_json(pairs));
  write_file(out / "heatmap_counts.csv", [&](std::ostream& o) { write_heatmap_counts(o, labels, pairs); });
  write_file(out / "heatmap_pvalues.csv", [&](std::ostream& o) { write_heatmap_pvalues(o, labels, pairs); });
  write_file(out / "heatmap_counts_filtered.csv", [&](std::ostream& o) { write_heatmap_counts(o, labels, pairs, true); });
  write_file(out / "heatmap_pvalues_filtered.csv", [&](std::ostream& o) { write_heatmap_pvalues(o, labels, pairs, true); });
  for (std::size_t t = 0; t < corpus.num_periods(); ++t) {
    write_file(out / ("scores_" + file_component(labels[t]) + ".csv"),
               [&](std::ostream& o) { write_period_scores(o, scorer, corpus, t); });
  }
  log << "analyze: wrote outputs to " << out.string() << '\n';
  return exit_ok;
}

/// Reads the run configuration recorded in `<output_dir>/manifest.json`.
inline RunConfig config_from_output_dir(const std::filesystem::path& output_dir) {
  const auto manifest = parse_json_text(read_text_file(output_dir / "manifest.json"), "manifest.json");
  RunConfig config;
  apply_key_values(key_values_from_manifest(manifest), config);
  config.output_dir = output_dir;
  return config;
}

/// Score series of one word from a completed analyze run in output_dir.
inline int cmd_score(const RunConfig& requested, std::string_view word, std::ostream& log) {
  const RunConfig config = config_from_output_dir(requested.output_dir);
  const AlignedCorpus corpus = load_corpus(config);
  if (!corpus.contains(word)) {
    std::string message = "'" + std::string(word) + "' is not in the shared vocabulary; nearest matches:";
    for (const auto& w : nearest_words(corpus.shared_vocab(), word, 5)) message += " " + w;
    throw Error(ErrorCode::word_not_found, message);
  }
  const auto pairs =
      pairs_from_json(parse_json_text(read_text_file(config.output_dir / "pairs.json"), "pairs.json"));
  if (pairs.size() != pair_count(corpus.num_periods())) {
    throw Error(ErrorCode::validation_error, "pairs.json does not match the corpus period count");
  }
  const SenseScorer scorer(corpus, pairs, config.empty_selection);
  const auto series = scorer.series(word);
  if (series.degenerate_terms > 0) {
    log << "warning: " << series.degenerate_terms << " zero-norm subvector term(s) scored as 1\n";
  }
  const auto path = config.output_dir / ("series_" + file_component(word) + ".csv");
  write_file(path, [&](std::ostream& o) { write_series(o, series); });
  log << "score: wrote " << path.string() << '\n';
  return exit_ok;
}

/// Synthetic corpus: one file per period plus truth.json in output_dir.
inline int cmd_synth(const RunConfig& config, std::ostream& log) {
  const SynthSpec spec = seeded_synth(config);
  spec.validate();
  const SyntheticCorpus corpus = generate_synthetic(spec);
  std::filesystem::create_directories(config.output_dir);
  const std::string ext = config.format == EmbeddingFormat::tsv ? ".tsv" : ".txt";
  for (const auto& s : corpus.snapshots) {
    write_file(config.output_dir / (file_component(s.period_label()) + ext),
               [&](std::ostream& o) { write_snapshot(o, s, config.format); });
  }
  write_json_file(config.output_dir / "truth.json", synth_truth_json(corpus, config));
  log << "synth: wrote " << corpus.snapshots.size() << " periods to " << config.output_dir.string() << '\n';
  return exit_ok;
}

/// Runs `fn`, mapping library errors to exit codes with a message on `log`.
template <class Fn>
int run_command(Fn&& fn, std::ostream& log) {
  try {
    return fn();
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: IOError: " << e.what() << '\n';
    return exit_user_error;
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << '\n';
    return exit_internal_error;
  }
}

}  // namespace mmdsense
