#pragma once

#include "mmdsense/embedding_store.hpp"
#include "mmdsense/error.hpp"
#include "mmdsense/numeric.hpp"
#include "mmdsense/random.hpp"
#include "mmdsense/sense_analysis.hpp"
#include "mmdsense/synthetic.hpp"
#include "mmdsense/variable_selection.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

namespace mmdsense {

inline constexpr std::string_view kVersion = "0.1.0";

using KeyValues = std::map<std::string, std::string, std::less<>>;

/// Everything a run needs. Seeds of the individual stages are derived from
/// `seed`; `jobs` never affects results and is not recorded.
struct RunConfig {
  std::filesystem::path input_dir;
  EmbeddingFormat format = EmbeddingFormat::word2vec_text;
  std::size_t n_train = 500;
  std::size_t n_test = 500;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  TestConfig test;
  EmptySelectionPolicy empty_selection = EmptySelectionPolicy::zero;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> allowlist;
  std::optional<std::filesystem::path> labels;
  unsigned jobs = 1;
  SynthSpec synth;

  std::uint64_t split_seed() const noexcept { return derive_seed(seed, 1); }
  std::uint64_t selection_seed() const noexcept { return derive_seed(seed, 2); }
  std::uint64_t test_seed() const noexcept { return derive_seed(seed, 3); }

  /// Stage configs with their derived seeds filled in.
  OptimizerConfig seeded_optimizer() const {
    OptimizerConfig c = optimizer;
    c.seed = selection_seed();
    return c;
  }
  TestConfig seeded_test() const {
    TestConfig c = test;
    c.seed = test_seed();
    return c;
  }

  void validate_analysis() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_config, msg); };
    if (input_dir.empty()) fail("input_dir is not set");
    if (n_train == 0 || n_test == 0) fail("n_train and n_test must be positive");
    if (jobs == 0) fail("jobs must be positive");
    optimizer.validate();
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] inline void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::invalid_config, "invalid value '" + std::string(value) + "' for " + std::string(key));
}

inline double to_real(std::string_view key, std::string_view value) {
  const auto parsed = parse_real(value);
  if (!parsed || !std::isfinite(*parsed)) bad_value(key, value);
  return *parsed;
}

template <class Int>
Int to_count(std::string_view key, std::string_view value) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

inline std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    const auto item = trim(value.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

template <class Int>
std::vector<Int> to_count_list(std::string_view key, std::string_view value) {
  std::vector<Int> out;
  for (auto item : split_list(value)) out.push_back(to_count<Int>(key, item));
  return out;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Flat `key = value` lines; `#` starts a comment, blank lines are ignored.
/// A repeated key is an error.
inline KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto newline = text.find('\n');
    std::string_view line = text.substr(0, newline);
    text.remove_prefix(newline == std::string_view::npos ? text.size() : newline + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::parse_error, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::parse_error, "config line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(std::string(key), std::string(value)).second) {
      throw Error(ErrorCode::parse_error, "config line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
    }
  }
  return out;
}

/// Applies recognised keys onto `config`; an unknown key is an error.
inline void apply_key_values(const KeyValues& values, RunConfig& config) {
  for (const auto& [key, value] : values) {
    OptimizerConfig& opt = config.optimizer;
    SynthSpec& syn = config.synth;
    if (key == "input_dir") config.input_dir = value;
    else if (key == "format") config.format = parse_embedding_format(value);
    else if (key == "n_train") config.n_train = detail::to_count<std::size_t>(key, value);
    else if (key == "n_test") config.n_test = detail::to_count<std::size_t>(key, value);
    else if (key == "seed") config.seed = detail::to_count<std::uint64_t>(key, value);
    else if (key == "output_dir") config.output_dir = value;
    else if (key == "allowlist") config.allowlist = value.empty() ? std::nullopt : std::optional<std::filesystem::path>(value);
    else if (key == "labels") config.labels = value.empty() ? std::nullopt : std::optional<std::filesystem::path>(value);
    else if (key == "jobs") config.jobs = detail::to_count<unsigned>(key, value);
    else if (key == "optimizer.lambda_grid") {
      opt.lambda_grid.clear();
      for (auto item : detail::split_list(value)) opt.lambda_grid.push_back(detail::to_real(key, item));
    }
    else if (key == "optimizer.max_iters") opt.max_iters = detail::to_count<int>(key, value);
    else if (key == "optimizer.step_size") opt.step_size = detail::to_real(key, value);
    else if (key == "optimizer.step_growth") opt.step_growth = detail::to_real(key, value);
    else if (key == "optimizer.tolerance") opt.tolerance = detail::to_real(key, value);
    else if (key == "optimizer.init") opt.init = parse_weight_init(value);
    else if (key == "optimizer.cv_folds") opt.cv_folds = detail::to_count<int>(key, value);
    else if (key == "optimizer.selection_threshold") opt.selection_threshold = detail::to_real(key, value);
    else if (key == "optimizer.weight_cutoff") opt.weight_cutoff = detail::to_real(key, value);
    else if (key == "optimizer.bandwidth_mode") opt.bandwidth_mode = parse_bandwidth_mode(value);
    else if (key == "test.n_permutations") config.test.n_permutations = detail::to_count<std::size_t>(key, value);
    else if (key == "test.bandwidth_mode") config.test.bandwidth_mode = parse_bandwidth_mode(value);
    else if (key == "scoring.empty_selection") config.empty_selection = parse_empty_selection_policy(value);
    else if (key == "synth.periods") syn.periods = detail::to_count<std::size_t>(key, value);
    else if (key == "synth.dim") syn.dim = detail::to_count<Eigen::Index>(key, value);
    else if (key == "synth.words") syn.words = detail::to_count<std::size_t>(key, value);
    else if (key == "synth.shift_dims") syn.shift_dims = detail::to_count_list<Eigen::Index>(key, value);
    else if (key == "synth.shift_periods") syn.shift_periods = detail::to_count_list<std::size_t>(key, value);
    else if (key == "synth.magnitude") syn.magnitude = detail::to_real(key, value);
    else if (key == "synth.word_fraction") syn.word_fraction = detail::to_real(key, value);
    else if (key == "synth.persistence") syn.persistence = detail::to_real(key, value);
    else throw Error(ErrorCode::invalid_config, "unknown config key '" + key + "'");
  }
}

/// Keys that determine analysis outputs, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> analysis_key_values(const RunConfig& c) {
  const OptimizerConfig& o = c.optimizer;
  return {
      {"input_dir", c.input_dir.generic_string()},
      {"format", std::string(to_string(c.format))},
      {"n_train", std::to_string(c.n_train)},
      {"n_test", std::to_string(c.n_test)},
      {"seed", std::to_string(c.seed)},
      {"allowlist", c.allowlist ? c.allowlist->generic_string() : ""},
      {"labels", c.labels ? c.labels->generic_string() : ""},
      {"optimizer.lambda_grid", detail::join(o.lambda_grid)},
      {"optimizer.max_iters", std::to_string(o.max_iters)},
      {"optimizer.step_size", format_double(o.step_size)},
      {"optimizer.step_growth", format_double(o.step_growth)},
      {"optimizer.tolerance", format_double(o.tolerance)},
      {"optimizer.init", std::string(to_string(o.init))},
      {"optimizer.cv_folds", std::to_string(o.cv_folds)},
      {"optimizer.selection_threshold", format_double(o.selection_threshold)},
      {"optimizer.weight_cutoff", format_double(o.weight_cutoff)},
      {"optimizer.bandwidth_mode", std::string(to_string(o.bandwidth_mode))},
      {"test.n_permutations", std::to_string(c.test.n_permutations)},
      {"test.bandwidth_mode", std::string(to_string(c.test.bandwidth_mode))},
      {"scoring.empty_selection", std::string(to_string(c.empty_selection))},
  };
}

inline std::vector<std::pair<std::string, std::string>> synth_key_values(const RunConfig& c) {
  const SynthSpec& s = c.synth;
  return {
      {"seed", std::to_string(c.seed)},
      {"format", std::string(to_string(c.format))},
      {"synth.periods", std::to_string(s.periods)},
      {"synth.dim", std::to_string(s.dim)},
      {"synth.words", std::to_string(s.words)},
      {"synth.shift_dims", detail::join(s.shift_dims)},
      {"synth.shift_periods", detail::join(s.effective_shift_periods())},
      {"synth.magnitude", format_double(s.magnitude)},
      {"synth.word_fraction", format_double(s.word_fraction)},
      {"synth.persistence", format_double(s.persistence)},
  };
}

/// The synthetic spec with the run seed applied.
inline SynthSpec seeded_synth(const RunConfig& c) {
  SynthSpec s = c.synth;
  s.seed = c.seed;
  return s;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace mmdsense
