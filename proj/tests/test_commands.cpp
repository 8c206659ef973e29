#include "mmdsense/mmdsense.hpp"
#include "test_util.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

using namespace mmdsense;
namespace fs = std::filesystem;

namespace {

RunConfig small_run(const fs::path& input, const fs::path& output) {
  RunConfig c;
  c.input_dir = input;
  c.output_dir = output;
  c.n_train = 60;
  c.n_test = 40;
  c.seed = 11;
  c.optimizer.lambda_grid = {1e-3, 1e-2, 1e-1, 1.0};
  c.optimizer.cv_folds = 3;
  c.optimizer.max_iters = 100;
  c.test.n_permutations = 100;
  return c;
}

void synthesize(const fs::path& dir, std::size_t periods, std::uint64_t seed = 4) {
  RunConfig c;
  c.output_dir = dir;
  c.seed = seed;
  c.synth.periods = periods;
  c.synth.dim = 4;
  c.synth.words = 120;
  c.synth.shift_dims = {1};
  c.synth.magnitude = 1.5;
  std::ostringstream log;
  REQUIRE(cmd_synth(c, log) == exit_ok);
}

std::vector<std::string> lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> sorted_names(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("analyze writes the full set of outputs") {
  mmdsense_test::TempDir tmp;
  synthesize(tmp.path() / "in", 3);
  const auto config = small_run(tmp.path() / "in", tmp.path() / "out");
  std::ostringstream log;
  REQUIRE(run_command([&] { return cmd_analyze(config, log); }, log) == exit_ok);
  CHECK(sorted_names(tmp.path() / "out") ==
        std::vector<std::string>{"heatmap_counts.csv", "heatmap_counts_filtered.csv", "heatmap_pvalues.csv",
                                 "heatmap_pvalues_filtered.csv", "manifest.json", "pairs.json", "scores_period_0.csv",
                                 "scores_period_1.csv", "scores_period_2.csv"});
  const auto counts = lines(tmp.path() / "out" / "heatmap_counts.csv");
  REQUIRE(counts.size() == 4);
  CHECK(counts[0] == ",period_0,period_1,period_2");
  const auto scores = lines(tmp.path() / "out" / "scores_period_2.csv");
  CHECK(scores.front() == "word,score,rank");
  CHECK(scores.size() == 121);
  const auto pairs = pairs_from_json(parse_json_text(read_text_file(tmp.path() / "out" / "pairs.json"), "pairs"));
  REQUIRE(pairs.size() == 3);
  // Only the last period is shifted, on dimension 1.
  CHECK(pairs[1].selected_vars == std::vector<Eigen::Index>{1});
  CHECK(pairs[2].selected_vars == std::vector<Eigen::Index>{1});
}

TEST_CASE("two periods give one populated heatmap cell") {
  mmdsense_test::TempDir tmp;
  synthesize(tmp.path() / "in", 2);
  const auto config = small_run(tmp.path() / "in", tmp.path() / "out");
  std::ostringstream log;
  REQUIRE(cmd_analyze(config, log) == exit_ok);
  const auto counts = lines(tmp.path() / "out" / "heatmap_counts.csv");
  REQUIRE(counts.size() == 3);
  CHECK(counts[1] == "period_0,,1");
  CHECK(counts[2] == "period_1,1,");
}

TEST_CASE("missing input directory fails before writing anything") {
  mmdsense_test::TempDir tmp;
  const auto config = small_run(tmp.path() / "absent", tmp.path() / "out");
  std::ostringstream log;
  CHECK(run_command([&] { return cmd_analyze(config, log); }, log) == exit_user_error);
  CHECK_FALSE(fs::exists(tmp.path() / "out"));
  CHECK_THAT(log.str(), Catch::Matchers::ContainsSubstring("IOError"));
}

TEST_CASE("invalid inputs map to user errors") {
  mmdsense_test::TempDir tmp;
  synthesize(tmp.path() / "in", 2);
  std::ostringstream log;
  auto config = small_run(tmp.path() / "in", tmp.path() / "out");
  config.n_train = 1000;
  CHECK(run_command([&] { return cmd_analyze(config, log); }, log) == exit_user_error);
  CHECK_THAT(log.str(), Catch::Matchers::ContainsSubstring("InsufficientVocab"));
  config = small_run(tmp.path() / "in", tmp.path() / "out");
  config.optimizer.lambda_grid.clear();
  CHECK(run_command([&] { return cmd_analyze(config, log); }, log) == exit_user_error);
  config = small_run(tmp.path() / "in", tmp.path() / "out");
  config.labels = tmp.path() / "labels.txt";
  std::ofstream(tmp.path() / "labels.txt") << "only_one\n";
  CHECK(run_command([&] { return cmd_analyze(config, log); }, log) == exit_user_error);
  CHECK_FALSE(fs::exists(tmp.path() / "out"));
  CHECK(run_command([]() -> int { throw std::logic_error("bug"); }, log) == exit_internal_error);
}

TEST_CASE("score writes one row per period and suggests near words") {
  mmdsense_test::TempDir tmp;
  synthesize(tmp.path() / "in", 3);
  const auto config = small_run(tmp.path() / "in", tmp.path() / "out");
  std::ostringstream log;
  REQUIRE(cmd_analyze(config, log) == exit_ok);

  RunConfig request;
  request.output_dir = config.output_dir;
  REQUIRE(run_command([&] { return cmd_score(request, "w007", log); }, log) == exit_ok);
  const auto rows = lines(config.output_dir / "series_w007.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "period,score");
  CHECK(rows[1].rfind("period_0,", 0) == 0);
  CHECK(rows[3].rfind("period_2,", 0) == 0);

  // The series agrees with the per-period score file.
  for (const auto& line : lines(config.output_dir / "scores_period_1.csv")) {
    if (line.rfind("w007,", 0) == 0) CHECK(line.substr(5, line.rfind(',') - 5) == rows[2].substr(9));
  }

  std::ostringstream err;
  CHECK(run_command([&] { return cmd_score(request, "w007x", err); }, err) == exit_user_error);
  CHECK_THAT(err.str(), Catch::Matchers::ContainsSubstring("WordNotFound"));
  CHECK_THAT(err.str(), Catch::Matchers::ContainsSubstring("w007"));
  CHECK_FALSE(fs::exists(config.output_dir / "series_w007x.csv"));
}

TEST_CASE("undefined scores appear as empty cells") {
  mmdsense_test::TempDir tmp;
  synthesize(tmp.path() / "in", 2);
  auto config = small_run(tmp.path() / "in", tmp.path() / "out");
  config.empty_selection = EmptySelectionPolicy::exclude;
  std::ostringstream log;
  REQUIRE(cmd_analyze(config, log) == exit_ok);
  // Replace the only pair with an empty selection; every score is then undefined.
  auto pairs = pairs_from_json(parse_json_text(read_text_file(config.output_dir / "pairs.json"), "pairs"));
  pairs[0].selected_vars.clear();
  pairs[0].n_selected = 0;
  pairs[0].p_value.reset();
  pairs[0].observed_stat.reset();
  pairs[0].status = PairStatus::empty_selection;
  write_json_file(config.output_dir / "pairs.json", pairs_to_json(pairs));
  RunConfig request;
  request.output_dir = config.output_dir;
  REQUIRE(cmd_score(request, "w010", log) == exit_ok);
  CHECK(lines(config.output_dir / "series_w010.csv") == std::vector<std::string>{"period,score", "period_0,", "period_1,"});
}

TEST_CASE("reruns are byte-identical regardless of jobs") {
  mmdsense_test::TempDir tmp;
  synthesize(tmp.path() / "in", 3);
  auto first = small_run(tmp.path() / "in", tmp.path() / "a");
  auto second = small_run(tmp.path() / "in", tmp.path() / "b");
  second.jobs = 3;
  std::ostringstream log;
  REQUIRE(cmd_analyze(first, log) == exit_ok);
  REQUIRE(cmd_analyze(second, log) == exit_ok);
  const auto names = sorted_names(first.output_dir);
  REQUIRE(names == sorted_names(second.output_dir));
  for (const auto& name : names) {
    INFO(name);
    CHECK(read_text_file(first.output_dir / name) == read_text_file(second.output_dir / name));
  }
}

TEST_CASE("a manifest reproduces its run") {
  mmdsense_test::TempDir tmp;
  synthesize(tmp.path() / "in", 2);
  const auto config = small_run(tmp.path() / "in", tmp.path() / "a");
  std::ostringstream log;
  REQUIRE(cmd_analyze(config, log) == exit_ok);
  RunConfig again = config_from_output_dir(config.output_dir);
  again.output_dir = tmp.path() / "b";
  REQUIRE(cmd_analyze(again, log) == exit_ok);
  CHECK(read_text_file(tmp.path() / "a" / "pairs.json") == read_text_file(tmp.path() / "b" / "pairs.json"));
  CHECK(read_text_file(tmp.path() / "a" / "manifest.json") == read_text_file(tmp.path() / "b" / "manifest.json"));
}

TEST_CASE("labels file overrides period labels") {
  mmdsense_test::TempDir tmp;
  synthesize(tmp.path() / "in", 2);
  std::ofstream(tmp.path() / "labels.txt") << "1990s\n2000s\n";
  auto config = small_run(tmp.path() / "in", tmp.path() / "out");
  config.labels = tmp.path() / "labels.txt";
  std::ostringstream log;
  REQUIRE(cmd_analyze(config, log) == exit_ok);
  CHECK(fs::exists(tmp.path() / "out" / "scores_1990s.csv"));
  CHECK(lines(tmp.path() / "out" / "heatmap_pvalues.csv")[0] == ",1990s,2000s");
}

TEST_CASE("synth is deterministic and round-trips through the loader") {
  mmdsense_test::TempDir tmp;
  synthesize(tmp.path() / "a", 3, 9);
  synthesize(tmp.path() / "b", 3, 9);
  synthesize(tmp.path() / "c", 3, 10);
  for (const auto& name : sorted_names(tmp.path() / "a")) {
    CHECK(read_text_file(tmp.path() / "a" / name) == read_text_file(tmp.path() / "b" / name));
  }
  CHECK(read_text_file(tmp.path() / "a" / "period_0.txt") != read_text_file(tmp.path() / "c" / "period_0.txt"));

  SynthSpec spec;
  spec.periods = 3;
  spec.dim = 4;
  spec.words = 120;
  spec.shift_dims = {1};
  spec.magnitude = 1.5;
  spec.seed = 9;
  const auto direct = generate_synthetic(spec);
  RunConfig c;
  c.input_dir = tmp.path() / "a";
  const auto loaded = load_corpus(c);
  REQUIRE(loaded.num_periods() == 3);
  for (std::size_t t = 0; t < 3; ++t) CHECK(loaded.period(t).matrix() == direct.snapshots[t].matrix());
  const auto truth = parse_json_text(read_text_file(tmp.path() / "a" / "truth.json"), "truth");
  CHECK(truth.at("shift_periods") == Json::array({2}));
}

TEST_CASE("nearest words by edit distance") {
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("", "abc") == 3);
  const std::vector<std::string> vocab{"bank", "band", "tank", "zebra", "bark"};
  const auto near = nearest_words(vocab, "bank", 3);
  REQUIRE(near.size() == 3);
  CHECK(near[0] == "bank");
  CHECK(near[1] == "band");
  CHECK(near[2] == "bark");
}
