// mmdsense: sense-change analysis over per-period word embeddings.
//
//   mmdsense synth   --output-dir data --periods 5 --shift-periods 2
//   mmdsense analyze --input-dir data --output-dir out
//   mmdsense score   --output-dir out --word w042

#include "mmdsense/mmdsense.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace mmdsense;

struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> output_dir;
  std::optional<std::string> format;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "key=value config file, or a manifest.json from an earlier run");
  cmd->add_option("--seed", flags.seed, "base seed for every random stage");
  cmd->add_option("--jobs", flags.jobs, "worker threads (does not change results)")->check(CLI::PositiveNumber);
  cmd->add_option("--output-dir", flags.output_dir, "output directory");
  cmd->add_option("--format", flags.format, "embedding file format: word2vec_text or tsv");
}

RunConfig base_config(const CommonFlags& flags, KeyValues overrides) {
  RunConfig config;
  config.jobs = default_jobs();
  if (flags.config) {
    const std::string text = read_text_file(*flags.config);
    const bool is_json = std::filesystem::path(*flags.config).extension() == ".json";
    apply_key_values(is_json ? key_values_from_manifest(parse_json_text(text, *flags.config)) : parse_key_values(text),
                     config);
  }
  if (flags.seed) overrides["seed"] = std::to_string(*flags.seed);
  if (flags.jobs) overrides["jobs"] = std::to_string(*flags.jobs);
  if (flags.output_dir) overrides["output_dir"] = *flags.output_dir;
  if (flags.format) overrides["format"] = *flags.format;
  apply_key_values(overrides, config);
  return config;
}

template <class T>
void put(KeyValues& kv, const char* key, const std::optional<T>& value) {
  if (!value) return;
  if constexpr (std::is_same_v<T, std::string>) {
    kv[key] = *value;
  } else if constexpr (std::is_floating_point_v<T>) {
    kv[key] = format_double(*value);
  } else {
    kv[key] = std::to_string(*value);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MMD-based sense-change analysis of diachronic word embeddings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  CommonFlags analyze_flags, score_flags, synth_flags;

  auto* analyze = app.add_subcommand("analyze", "select sense-change variables and test every period pair");
  add_common(analyze, analyze_flags);
  std::optional<std::string> input_dir, allowlist, labels;
  std::optional<std::size_t> n_train, n_test, n_permutations;
  analyze->add_option("--input-dir", input_dir, "directory of per-period embedding files");
  analyze->add_option("--n-train", n_train, "training words per period pair");
  analyze->add_option("--n-test", n_test, "held-out test words per period pair");
  analyze->add_option("--n-permutations", n_permutations, "permutations per test");
  analyze->add_option("--allowlist", allowlist, "restrict the shared vocabulary to these words (one per line)");
  analyze->add_option("--labels", labels, "period labels, one per line, in filename order");

  auto* score = app.add_subcommand("score", "write the score series of one word from an analyze run");
  add_common(score, score_flags);
  std::string word;
  score->add_option("--word", word, "word to score")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with known shifted dimensions");
  add_common(synth, synth_flags);
  std::optional<std::size_t> periods, words;
  std::optional<long> dim;
  std::optional<std::string> shift_dims, shift_periods;
  std::optional<double> magnitude, word_fraction, persistence;
  synth->add_option("--periods", periods, "number of periods");
  synth->add_option("--dim", dim, "embedding dimension");
  synth->add_option("--words", words, "vocabulary size");
  synth->add_option("--shift-dims", shift_dims, "comma-separated shifted dimensions");
  synth->add_option("--shift-periods", shift_periods, "comma-separated shifted period indices (default: last)");
  synth->add_option("--magnitude", magnitude, "shift added on each shifted dimension");
  synth->add_option("--word-fraction", word_fraction, "fraction of words that shift");
  synth->add_option("--persistence", persistence, "share of a word's vector kept across periods, in [0, 1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? exit_ok : exit_user_error;
  }

  return run_command(
      [&]() -> int {
        if (*analyze) {
          KeyValues kv;
          put(kv, "input_dir", input_dir);
          put(kv, "n_train", n_train);
          put(kv, "n_test", n_test);
          put(kv, "test.n_permutations", n_permutations);
          put(kv, "allowlist", allowlist);
          put(kv, "labels", labels);
          return cmd_analyze(base_config(analyze_flags, kv), std::cerr);
        }
        if (*score) return cmd_score(base_config(score_flags, {}), word, std::cerr);
        KeyValues kv;
        put(kv, "synth.periods", periods);
        put(kv, "synth.dim", dim);
        put(kv, "synth.words", words);
        put(kv, "synth.shift_dims", shift_dims);
        put(kv, "synth.shift_periods", shift_periods);
        put(kv, "synth.magnitude", magnitude);
        put(kv, "synth.word_fraction", word_fraction);
        put(kv, "synth.persistence", persistence);
        return cmd_synth(base_config(synth_flags, kv), std::cerr);
      },
      std::cerr);
}
