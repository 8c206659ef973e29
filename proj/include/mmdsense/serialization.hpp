#pragma once

#include "mmdsense/config.hpp"
#include "mmdsense/error.hpp"
#include "mmdsense/numeric.hpp"
#include "mmdsense/permutation_test.hpp"
#include "mmdsense/sense_analysis.hpp"
#include "mmdsense/synthetic.hpp"
#include "mmdsense/variable_selection.hpp"

#include "json.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mmdsense {

using Json = nlohmann::ordered_json;

inline constexpr double kSignificanceLevel = 0.05;

namespace detail {

inline Json optional_number(const std::optional<double>& value) {
  return value ? Json(*value) : Json(nullptr);
}

inline Json index_array(const std::vector<Eigen::Index>& values) {
  Json out = Json::array();
  for (auto v : values) out.push_back(v);
  return out;
}

inline Json vector_array(const Eigen::VectorXd& values) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < values.size(); ++i) out.push_back(values(i));
  return out;
}

}  // namespace detail

inline Json to_json(const PermutationTestResult& r) {
  Json out;
  out["p_value"] = r.p_value;
  out["observed_stat"] = r.observed_stat;
  out["n_permutations"] = r.n_permutations;
  out["n_selected"] = r.selected_vars.size();
  out["selected_vars"] = detail::index_array(r.selected_vars);
  return out;
}

inline Json to_json(const SelectionResult& r) {
  Json out;
  out["selected"] = detail::index_array(r.selected);
  out["stability"] = detail::vector_array(r.stability);
  out["kept_runs"] = r.kept_runs;
  out["total_runs"] = r.runs.size();
  out["bandwidths"] = detail::vector_array(r.bandwidths);
  out["bandwidth_fallback_dims"] = detail::index_array(r.bandwidth_fallback_dims);
  Json runs = Json::array();
  for (const auto& run : r.runs) {
    Json j;
    j["lambda"] = run.lambda;
    j["fold"] = run.fold;
    j["selected"] = detail::index_array(run.selected);
    j["validation_ratio"] = run.validation_ratio;
    j["kept"] = run.kept;
    j["iterations"] = run.diagnostics.iterations;
    j["converged"] = run.diagnostics.converged;
    j["final_objective"] = run.diagnostics.final_objective;
    runs.push_back(std::move(j));
  }
  out["runs"] = std::move(runs);
  return out;
}

inline Json to_json(const PairAnalysis& p) {
  Json out;
  out["period_a"] = p.label_a;
  out["period_b"] = p.label_b;
  out["index_a"] = p.period_a;
  out["index_b"] = p.period_b;
  out["status"] = std::string(to_string(p.status));
  out["selected_vars"] = detail::index_array(p.selected_vars);
  out["n_selected"] = p.n_selected;
  out["p_value"] = detail::optional_number(p.p_value);
  out["observed_stat"] = detail::optional_number(p.observed_stat);
  Json diag;
  diag["kept_runs"] = p.kept_runs;
  diag["total_runs"] = p.total_runs;
  Json stab = Json::array();
  for (double s : p.stability) stab.push_back(s);
  diag["stability"] = std::move(stab);
  out["diagnostics"] = std::move(diag);
  out["error"] = p.error.empty() ? Json(nullptr) : Json(p.error);
  return out;
}

inline PairAnalysis pair_from_json(const Json& j) {
  try {
    PairAnalysis p;
    p.label_a = j.at("period_a").get<std::string>();
    p.label_b = j.at("period_b").get<std::string>();
    p.period_a = j.at("index_a").get<std::size_t>();
    p.period_b = j.at("index_b").get<std::size_t>();
    p.status = parse_pair_status(j.at("status").get<std::string>());
    p.selected_vars = j.at("selected_vars").get<std::vector<Eigen::Index>>();
    p.n_selected = j.at("n_selected").get<std::size_t>();
    if (!j.at("p_value").is_null()) p.p_value = j.at("p_value").get<double>();
    if (!j.at("observed_stat").is_null()) p.observed_stat = j.at("observed_stat").get<double>();
    const Json& diag = j.at("diagnostics");
    p.kept_runs = diag.at("kept_runs").get<std::size_t>();
    p.total_runs = diag.at("total_runs").get<std::size_t>();
    p.stability = diag.at("stability").get<std::vector<double>>();
    if (!j.at("error").is_null()) p.error = j.at("error").get<std::string>();
    if (p.n_selected != p.selected_vars.size()) throw Error(ErrorCode::parse_error, "n_selected disagrees with selected_vars");
    return p;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed pair record: ") + e.what());
  }
}

inline Json pairs_to_json(const std::vector<PairAnalysis>& pairs) {
  Json out = Json::array();
  for (const auto& p : pairs) out.push_back(to_json(p));
  return out;
}

inline std::vector<PairAnalysis> pairs_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::parse_error, "pairs file must hold a JSON array");
  std::vector<PairAnalysis> out;
  for (const auto& item : j) out.push_back(pair_from_json(item));
  return out;
}

inline Json manifest_json(std::string_view command, const std::vector<std::pair<std::string, std::string>>& config,
                          std::uint64_t seed, const std::vector<std::string>& period_labels) {
  Json out;
  out["tool"] = "mmdsense";
  out["version"] = std::string(kVersion);
  out["command"] = std::string(command);
  out["seed"] = seed;
  Json cfg = Json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  out["config"] = std::move(cfg);
  out["periods"] = period_labels;
  return out;
}

/// The key/value config recorded in a manifest.
inline KeyValues key_values_from_manifest(const Json& manifest) {
  try {
    KeyValues out;
    for (const auto& [k, v] : manifest.at("config").items()) out.emplace(k, v.get<std::string>());
    return out;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed manifest: ") + e.what());
  }
}

inline Json parse_json_text(const std::string& text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string(what) + ": " + e.what());
  }
}

inline Json synth_truth_json(const SyntheticCorpus& corpus, const RunConfig& config) {
  Json out;
  out["seed"] = config.seed;
  Json spec = Json::object();
  for (const auto& [k, v] : synth_key_values(config)) spec[k] = v;
  out["spec"] = std::move(spec);
  out["shift_periods"] = corpus.shift_periods;
  out["shifted_words"] = corpus.shifted_words;
  Json pairs = Json::array();
  for (const auto& t : corpus.pairs) {
    Json j;
    j["period_a"] = corpus.snapshots[t.period_a].period_label();
    j["period_b"] = corpus.snapshots[t.period_b].period_label();
    j["shifted_dims"] = detail::index_array(t.shifted_dims);
    pairs.push_back(std::move(j));
  }
  out["pairs"] = std::move(pairs);
  return out;
}

// ---- CSV ----

/// RFC 4180 quoting, only when the field needs it.
inline std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Filename-safe form of a word or label: bytes outside [A-Za-z0-9._-]
/// become %XX.
inline std::string file_component(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '.' || c == '_' || c == '-') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  if (out.empty() || out == "." || out == "..") out = "%" + out;
  return out;
}

/// T x T matrix with labels as header row and column. `cell` returns the
/// text for pair (a, b), a < b; the lower triangle mirrors it and the
/// diagonal stays empty.
template <class CellFn>
void write_pair_matrix(std::ostream& out, const std::vector<std::string>& labels,
                       const std::vector<PairAnalysis>& pairs, CellFn&& cell) {
  const std::size_t periods = labels.size();
  std::vector<std::string> cells(periods * periods);
  for (const auto& p : pairs) {
    if (p.period_a >= periods || p.period_b >= periods) continue;
    const std::string text = cell(p);
    cells[p.period_a * periods + p.period_b] = text;
    cells[p.period_b * periods + p.period_a] = text;
  }
  for (std::size_t t = 0; t < periods; ++t) out << ',' << csv_field(labels[t]);
  out << '\n';
  for (std::size_t r = 0; r < periods; ++r) {
    out << csv_field(labels[r]);
    for (std::size_t c = 0; c < periods; ++c) out << ',' << cells[r * periods + c];
    out << '\n';
  }
}

inline bool significant(const PairAnalysis& p) { return p.p_value && *p.p_value < kSignificanceLevel; }

/// Cell text for selection counts; failed pairs without a selection are empty.
inline std::string count_cell(const PairAnalysis& p) {
  if (p.status == PairStatus::failed && p.selected_vars.empty()) return "";
  return std::to_string(p.n_selected);
}

inline void write_heatmap_counts(std::ostream& out, const std::vector<std::string>& labels,
                                 const std::vector<PairAnalysis>& pairs, bool filtered = false) {
  write_pair_matrix(out, labels, pairs, [&](const PairAnalysis& p) -> std::string {
    if (filtered && !(p.status == PairStatus::failed && p.selected_vars.empty()) && !significant(p)) return "0";
    return count_cell(p);
  });
}

inline void write_heatmap_pvalues(std::ostream& out, const std::vector<std::string>& labels,
                                  const std::vector<PairAnalysis>& pairs, bool filtered = false) {
  write_pair_matrix(out, labels, pairs, [&](const PairAnalysis& p) -> std::string {
    if (!p.p_value || (filtered && !significant(p))) return "";
    return format_double(*p.p_value);
  });
}

/// word,score,rank by descending score (ties by word); words without a
/// defined score follow with empty score and rank.
inline void write_period_scores(std::ostream& out, const SenseScorer& scorer, const AlignedCorpus& corpus,
                                std::size_t t) {
  const auto ranked = scorer.rank_words(t, corpus.shared_vocab().size());
  out << "word,score,rank\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out << csv_field(ranked[i].word) << ',' << format_double(ranked[i].score) << ',' << (i + 1) << '\n';
  }
  if (ranked.size() == corpus.shared_vocab().size()) return;
  const auto scores = scorer.period_scores(t);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!scores[i].value) out << csv_field(corpus.shared_vocab()[i]) << ",,\n";
  }
}

inline void write_series(std::ostream& out, const WordScoreSeries& series) {
  out << "period,score\n";
  for (std::size_t t = 0; t < series.scores.size(); ++t) {
    out << csv_field(series.period_labels[t]) << ',';
    if (series.scores[t]) out << format_double(*series.scores[t]);
    out << '\n';
  }
}

/// Writes via a callback into `path`, raising IOError on failure.
template <class WriteFn>
void write_file(const std::filesystem::path& path, WriteFn&& write) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  write(out);
  out.flush();
  if (!out) throw Error(ErrorCode::io_error, "error while writing '" + path.string() + "'");
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_file(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

}  // namespace mmdsense
