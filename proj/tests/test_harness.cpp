#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nellcom/errors.hpp"
#include "nellcom/harness.hpp"
#include "nellcom/plots.hpp"

using namespace nellcom;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config(const std::string& grammar, uint64_t seed) {
  TrainConfig cfg;
  cfg.grammar = grammar;
  cfg.seed = seed;
  cfg.n_entities = 6;
  cfg.n_actions = 4;
  cfg.sl_epochs = 2;
  cfg.rl_epochs = 2;
  cfg.batch_size = 16;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("execute_run writes the full artifact set, byte-reproducibly") {
  TempDir tmp("nellcom_run_test");
  const TrainConfig cfg = tiny_config("flex+op", 5);

  const RunOutcome first = execute_run(cfg, 5, tmp.path);
  CHECK(fs::exists(first.dir / "trajectory.csv"));
  CHECK(fs::exists(first.dir / "summary.json"));
  CHECK(fs::exists(first.dir / "manifest.json"));
  for (const char* name : {"speaker_sl", "listener_sl", "speaker_rl", "listener_rl"}) {
    CHECK(fs::exists(first.dir / (std::string(name) + ".json")));
    CHECK(fs::exists(first.dir / (std::string(name) + ".bin")));
  }

  // A re-run never mutates the completed directory: it gets a fresh one
  // with identical deterministic artifacts.
  const std::string csv_before = slurp(first.dir / "trajectory.csv");
  const RunOutcome second = execute_run(cfg, 5, tmp.path);
  CHECK(second.dir != first.dir);
  CHECK(slurp(first.dir / "trajectory.csv") == csv_before);
  CHECK(slurp(second.dir / "trajectory.csv") == csv_before);
  CHECK(slurp(second.dir / "speaker_rl.bin") == slurp(first.dir / "speaker_rl.bin"));
  CHECK(slurp(second.dir / "summary.json") == slurp(first.dir / "summary.json"));
}

TEST_CASE("trajectory CSV round-trips records exactly") {
  TempDir tmp("nellcom_csv_test");
  const TrainConfig cfg = tiny_config("fix+op", 2);
  const ExperimentResult result = run_experiment(cfg);
  const fs::path path = tmp.path / "traj.csv";
  write_trajectory_csv(result.trajectory, path);
  const std::vector<EpochRecord> loaded = read_trajectory_csv(path);

  REQUIRE(loaded.size() == result.trajectory.records.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    const EpochRecord& a = result.trajectory.records[i];
    const EpochRecord& b = loaded[i];
    CHECK(a.phase == b.phase);
    CHECK(a.epoch == b.epoch);
    CHECK(a.counts == b.counts);
    CHECK(a.has_counts == b.has_counts);
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (size_t k = 0; k < a.metrics.size(); ++k) {
      CHECK(a.metrics[k].first == b.metrics[k].first);
      const double va = a.metrics[k].second, vb = b.metrics[k].second;
      CHECK(((std::isnan(va) && std::isnan(vb)) || va == vb));  // %.17g round-trips
    }
  }
}

TEST_CASE("evaluate_checkpoints reproduces the recorded final metrics") {
  TempDir tmp("nellcom_eval_test");
  const TrainConfig cfg = tiny_config("flex+op", 8);
  const RunOutcome run = execute_run(cfg, 8, tmp.path);

  const nlohmann::json eval_rl = evaluate_checkpoints(run.dir, "rl");
  const nlohmann::json& final_rec = run.summary.at("final");
  for (const auto& [key, value] : eval_rl.at("metrics").items()) {
    if (key == "mean_reward") continue;  // training-time only
    if (!final_rec.contains(key) || value.is_null()) continue;
    CHECK(value.get<double>() ==
          doctest::Approx(final_rec.at(key).get<double>()).epsilon(1e-12));
  }

  const nlohmann::json eval_sl = evaluate_checkpoints(run.dir, "sl");
  const nlohmann::json& end_sl = run.summary.at("end_of_sl");
  CHECK(eval_sl.at("metrics").at("listening_accuracy").get<double>() ==
        doctest::Approx(end_sl.at("listening_accuracy").get<double>()).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate_checkpoints(run.dir, "nope"), ConfigError);
  fs::remove(run.dir / "speaker_rl.bin");
  CHECK_THROWS_AS(evaluate_checkpoints(run.dir, "rl"), CheckpointError);
}

TEST_CASE("aggregate: single run, pooled proportions, strictness") {
  TempDir tmp("nellcom_agg_test");
  const RunOutcome r0 = execute_run(tiny_config("flex+op", 0), 0, tmp.path);
  const RunOutcome r1 = execute_run(tiny_config("flex+op", 1), 1, tmp.path);

  const RunArtifacts a0 = load_run(r0.dir);
  const RunArtifacts a1 = load_run(r1.dir);

  // Single run: mean equals the run, sd 0.
  const AggregateResult single = aggregate({a0});
  const EpochRecord& rec = a0.trajectory.at("rl", 2);
  CHECK(single.at("rl", 2, "effort").mean == get_metric(rec, "effort"));
  CHECK(single.at("rl", 2, "effort").sd == 0.0);

  // Two runs: mean of per-seed proportions equals the pooled-count
  // proportion because the test sets have identical size.
  const AggregateResult both = aggregate({a0, a1});
  const EpochRecord& e0 = a0.trajectory.at("rl", 2);
  const EpochRecord& e1 = a1.trajectory.at("rl", 2);
  const double pooled_sov =
      double(e0.counts[0] + e0.counts[1] + e1.counts[0] + e1.counts[1]) /
      double(2 * a0.config.n_entities * (a0.config.n_entities - 1) * a0.config.n_actions / 3);
  CHECK(both.at("rl", 2, "prop_sov").mean == doctest::Approx(pooled_sov).epsilon(1e-12));
  CHECK(both.n_runs == 2);

  // Mixed grammars are rejected.
  const RunOutcome rf = execute_run(tiny_config("fix+op", 0), 0, tmp.path);
  CHECK_THROWS_AS(aggregate({a0, load_run(rf.dir)}), DataError);

  // A missing epoch is an error, not a silent NaN.
  RunArtifacts truncated = a1;
  truncated.trajectory.records.pop_back();
  CHECK_THROWS_AS(aggregate({a0, truncated}), DataError);

  CHECK_THROWS_AS(aggregate({}), DataError);
}

TEST_CASE("analyze_runs writes per-grammar aggregates and the tradeoff table") {
  TempDir tmp("nellcom_analyze_test");
  execute_run(tiny_config("fix+op", 0), 0, tmp.path);
  execute_run(tiny_config("fix+op", 1), 1, tmp.path);
  execute_run(tiny_config("flex+op", 0), 0, tmp.path);

  const fs::path agg = analyze_runs(tmp.path, tmp.path / "aggregate");
  CHECK(fs::exists(agg / "fix+op" / "metrics_mean.csv"));
  CHECK(fs::exists(agg / "flex+op" / "metrics_mean.csv"));
  CHECK(fs::exists(agg / "aggregate.json"));

  const std::string tradeoff = slurp(agg / "tradeoff.csv");
  CHECK(tradeoff.find("grammar,kind,seed,h,e") == 0);
  CHECK(tradeoff.find("fix+op,initial,-1,") != std::string::npos);
  CHECK(tradeoff.find("flex+op,pair,0,") != std::string::npos);

  CHECK_THROWS_AS(analyze_runs(tmp.path / "empty", tmp.path / "agg2"), DataError);
}

TEST_CASE("plots emit standalone SVG with embedded data tables") {
  TempDir tmp("nellcom_plot_test");
  std::vector<RunArtifacts> runs;
  for (uint64_t s = 0; s < 2; ++s)
    runs.push_back(load_run(execute_run(tiny_config("flex+op", s), int(s), tmp.path).dir));

  const fs::path t1 = tmp.path / "timelines.svg";
  plot_timelines(aggregate(runs), t1);
  const std::string svg1 = slurp(t1);
  CHECK(svg1.find("<svg") != std::string::npos);
  CHECK(svg1.rfind("</svg>\n") == svg1.size() - 7);
  CHECK(svg1.find("phase,epoch,metric,mean,sd") != std::string::npos);

  const fs::path t2 = tmp.path / "individuals.svg";
  plot_individuals(runs, t2);
  const std::string svg2 = slurp(t2);
  CHECK(svg2.find("seed,epoch,sov_no_mk") != std::string::npos);

  const fs::path t3 = tmp.path / "tradeoff.svg";
  plot_tradeoff({aggregate(runs)}, t3);
  const std::string svg3 = slurp(t3);
  CHECK(svg3.find("grammar,kind,seed,h,e") != std::string::npos);
  CHECK(svg3.find("initial") != std::string::npos);
}

TEST_CASE("run_sweep covers the grid and aggregates") {
  TempDir tmp("nellcom_sweep_test");
  SweepConfig cfg;
  cfg.grammars = {"fix+op", "flex+op"};
  cfg.seed_indices = {0, 1};
  cfg.base = tiny_config("fix+op", 0);
  cfg.out_root = tmp.path;
  cfg.jobs = 2;
  cfg.quiet = true;

  const SweepResult result = run_sweep(cfg);
  CHECK(result.run_dirs.size() == 4);
  for (const fs::path& d : result.run_dirs) CHECK(is_completed_run_dir(d));
  CHECK(fs::exists(result.aggregate_dir / "tradeoff.csv"));

  // Cell streams derive from (master seed, grammar, index): the same index
  // under different grammars uses different randomness.
  const RunArtifacts fix0 = load_run(tmp.path / "fix+op" / "seed_0");
  const RunArtifacts flex0 = load_run(tmp.path / "flex+op" / "seed_0");
  CHECK(fix0.config.seed != flex0.config.seed);
}

TEST_CASE("cli: exit codes and the documented subcommands") {
  TempDir tmp("nellcom_cli_test");
  const std::string out = (tmp.path / "out").string();

  // Config errors -> 2.
  CHECK(cli_run({"train", "--grammar", "martian", "--out", out}) == 2);
  CHECK(cli_run({"plot", "--kind", "timelines", "--runs", out}) == 2);
  CHECK(cli_run({"bogus-subcommand"}) == 2);

  // Data errors -> 3.
  CHECK(cli_run({"analyze", "--runs", (tmp.path / "void").string()}) == 3);

  // gen-data writes parseable dataset files.
  CHECK(cli_run({"gen-data", "--grammar", "fix+op", "--seed", "1", "--out", out}) == 0);
  const fs::path data_dir = fs::path(out) / "dataset" / "fix+op" / "seed_1";
  CHECK(fs::exists(data_dir / "train.txt"));
  CHECK(fs::exists(data_dir / "test.txt"));
  const Vocabulary vocab(10, 8);
  const auto train_pairs = read_dataset_file(data_dir / "train.txt", vocab);
  CHECK(train_pairs.size() == 480);

  // A tiny end-to-end train run through the CLI; config file + overrides.
  const fs::path cfg_file = tmp.path / "cfg.json";
  {
    std::ofstream f(cfg_file);
    f << R"({"grammar": "flex+op", "n_entities": 6, "n_actions": 4,
             "sl_epochs": 1, "rl_epochs": 1, "batch_size": 16, "seed": 3})";
  }
  CHECK(cli_run({"train", "--config", cfg_file.string(), "--rl-epochs", "2", "--out", out}) ==
        0);
  const fs::path run_dir = fs::path(out) / "flex+op" / "seed_3";
  CHECK(is_completed_run_dir(run_dir));
  const RunArtifacts run = load_run(run_dir);
  CHECK(run.config.rl_epochs == 2);  // flag overrides file
  CHECK(run.config.sl_epochs == 1);

  // evaluate on the completed run -> 0; missing checkpoint -> 4.
  CHECK(cli_run({"evaluate", "--run", run_dir.string(), "--phase", "rl"}) == 0);
  fs::remove(run_dir / "listener_rl.bin");
  CHECK(cli_run({"evaluate", "--run", run_dir.string(), "--phase", "rl"}) == 4);

  // analyze + plot on real runs -> 0.
  CHECK(cli_run({"analyze", "--runs", out}) == 0);
  CHECK(cli_run({"plot", "--kind", "tradeoff", "--runs", out}) == 0);
  CHECK(cli_run({"plot", "--kind", "individuals", "--grammar", "flex+op", "--runs", out}) == 0);
  CHECK(fs::exists(fs::path(out) / "plots" / "tradeoff.svg"));
}

TEST_CASE("grammar specs load from JSON files end to end") {
  TempDir tmp("nellcom_grammar_file_test");
  const fs::path gfile = tmp.path / "mygrammar.json";
  {
    std::ofstream f(gfile);
    f << R"({"name": "mostly-sov", "p_sov": 0.9, "p_mark": 0.5})";
  }
  TrainConfig cfg = tiny_config(gfile.string(), 1);
  cfg.sl_epochs = 1;
  cfg.rl_epochs = 1;
  const RunOutcome run = execute_run(cfg, 1, tmp.path / "out");
  CHECK(run.dir == tmp.path / "out" / "mostly-sov" / "seed_1");
  CHECK(is_completed_run_dir(run.dir));

  CHECK_THROWS_AS(GrammarSpec::resolve((tmp.path / "missing.json").string()), ConfigError);
  CHECK_THROWS_AS(GrammarSpec::resolve("martian"), ConfigError);
}

TEST_CASE("NELLCOM_OUT provides the default output root") {
  setenv("NELLCOM_OUT", "/tmp/nellcom_env_root", 1);
  CHECK(default_out_root() == fs::path("/tmp/nellcom_env_root"));
  unsetenv("NELLCOM_OUT");
  CHECK(default_out_root() == fs::path("out"));
}
