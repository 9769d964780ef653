#include "nellcom/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "nellcom/checkpoint.hpp"
#include "nellcom/errors.hpp"
#include "nellcom/plots.hpp"

namespace nellcom {

namespace fs = std::filesystem;

namespace {

nlohmann::json metrics_json(const EpochRecord& rec) {
  nlohmann::json out;
  for (const auto& [name, value] : rec.metrics) {
    if (std::isnan(value))
      out[name] = nullptr;
    else
      out[name] = value;
  }
  return out;
}

nlohmann::json counts_json(const EpochRecord& rec) {
  nlohmann::json out;
  for (size_t c = 0; c < 5; ++c)
    out[utterance_class_name(static_cast<UtteranceClass>(c))] = rec.counts[c];
  return out;
}

}  // namespace

RunOutcome execute_run(const TrainConfig& cfg, int seed_index, const fs::path& out_root,
                       bool quiet) {
  const auto t_start = std::chrono::steady_clock::now();
  ExperimentResult result = run_experiment(cfg);

  // Directory names use the resolved grammar name so that file-based
  // grammar specs do not leak paths into the output tree.
  const std::string grammar_name = GrammarSpec::resolve(cfg.grammar).name;
  const fs::path dir =
      fresh_run_dir(out_root / grammar_name / ("seed_" + std::to_string(seed_index)));
  fs::create_directories(dir);

  write_trajectory_csv(result.trajectory, dir / "trajectory.csv");

  save_speaker_checkpoint(result.speaker_end_sl, result.data.vocab,
                          (dir / "speaker_sl").string(), result.speaker_steps_sl,
                          cfg.learning_rate);
  save_listener_checkpoint(result.listener_end_sl, result.data.vocab,
                           (dir / "listener_sl").string(), result.listener_steps_sl,
                           cfg.learning_rate);
  save_speaker_checkpoint(result.speaker, result.data.vocab, (dir / "speaker_rl").string(),
                          result.speaker_steps, cfg.learning_rate);
  save_listener_checkpoint(result.listener, result.data.vocab, (dir / "listener_rl").string(),
                           result.listener_steps, cfg.learning_rate);

  const EpochRecord& end_sl = result.trajectory.at("rl", 0);
  const EpochRecord& final_rec = result.trajectory.at("rl", cfg.rl_epochs);
  const UncertaintyEffortPoint initial =
      initial_tradeoff_point(result.data.test_meanings, result.data.grammar, result.data.vocab);

  nlohmann::json summary;
  summary["config"] = config_to_json(cfg);
  summary["seed_index"] = seed_index;
  summary["vocabulary_hash"] = result.data.vocab.hash();
  summary["n_train"] = result.data.train_meanings.size();
  summary["n_test"] = result.data.test_meanings.size();
  summary["end_of_sl"] = metrics_json(end_sl);
  summary["final"] = metrics_json(final_rec);
  summary["final_counts"] = counts_json(final_rec);
  summary["tradeoff"] = {{"h", get_metric(final_rec, "uncertainty_h")},
                         {"e", get_metric(final_rec, "effort")}};
  summary["initial_tradeoff"] = {{"h", initial.h_bits}, {"e", initial.effort}};

  {
    std::ofstream out(dir / "summary.json", std::ios::binary);
    if (!out) throw DataError("cannot write summary.json in '" + dir.string() + "'");
    out << summary.dump(2) << '\n';
  }
  {
    // Timestamps live only in this sidecar so everything else is
    // byte-reproducible from (config, seed).
    const auto wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    nlohmann::json manifest = {{"created_unix",
                                std::chrono::duration_cast<std::chrono::seconds>(
                                    std::chrono::system_clock::now().time_since_epoch())
                                    .count()},
                               {"wall_seconds", wall}};
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
  }

  if (!quiet) {
    std::cerr << "run " << cfg.grammar << " seed " << seed_index << " -> " << dir.string()
              << "\n";
  }
  return {dir, std::move(summary)};
}

SweepResult run_sweep(const SweepConfig& cfg) {
  std::vector<int> seeds = cfg.seed_indices;
  if (seeds.empty()) {
    seeds.resize(20);
    for (int i = 0; i < 20; ++i) seeds[i] = i;
  }
  for (const std::string& g : cfg.grammars) GrammarSpec::resolve(g);  // fail fast

  struct Cell {
    std::string grammar;
    int seed_index;
  };
  std::vector<Cell> cells;
  for (const std::string& g : cfg.grammars)
    for (int s : seeds) cells.push_back({g, s});

  std::vector<fs::path> dirs(cells.size());
  std::atomic<size_t> next{0};
  std::mutex io_mutex;
  std::exception_ptr first_error;
  std::mutex error_mutex;

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const size_t n_workers =
      std::min(cells.size(), static_cast<size_t>(cfg.jobs > 0 ? cfg.jobs : hw));

  const auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) return;
      }
      try {
        TrainConfig run_cfg = cfg.base;
        run_cfg.grammar = cells[i].grammar;
        run_cfg.seed = derive_seed(cfg.master_seed, cells[i].grammar,
                                   static_cast<uint64_t>(cells[i].seed_index));
        if (!cfg.quiet) {
          std::lock_guard<std::mutex> lock(io_mutex);
          std::cerr << "[" << (i + 1) << "/" << cells.size() << "] " << cells[i].grammar
                    << " seed " << cells[i].seed_index << "\n";
        }
        RunOutcome outcome = execute_run(run_cfg, cells[i].seed_index, cfg.out_root, true);
        dirs[i] = outcome.dir;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  for (size_t w = 0; w + 1 < n_workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  SweepResult result;
  result.run_dirs.assign(dirs.begin(), dirs.end());
  result.aggregate_dir = analyze_runs(cfg.out_root, cfg.out_root / "aggregate");
  return result;
}

nlohmann::json evaluate_checkpoints(const fs::path& run_dir, const std::string& phase) {
  if (phase != "sl" && phase != "rl") throw ConfigError("evaluate: phase must be sl or rl");
  const RunArtifacts run = load_run(run_dir);
  const DataContext data = prepare_data(run.config);

  SpeakerParams speaker =
      load_speaker_checkpoint((run_dir / ("speaker_" + phase)).string(), data.vocab);
  ListenerParams listener =
      load_listener_checkpoint((run_dir / ("listener_" + phase)).string(), data.vocab);

  const int epoch = phase == "sl" ? run.config.sl_epochs : run.config.rl_epochs;
  EpochRecord rec = evaluate_epoch(phase, epoch, speaker, &listener, data, run.config, true);

  nlohmann::json out;
  out["run"] = run_dir.string();
  out["phase"] = phase;
  out["metrics"] = metrics_json(rec);
  out["counts"] = counts_json(rec);
  return out;
}

void write_dataset_files(const TrainConfig& cfg, const fs::path& out_dir) {
  const DataContext data = prepare_data(cfg);
  fs::create_directories(out_dir);
  Rng rng(derive_seed(cfg.seed, "gen-data"));
  const auto train_pairs =
      cfg.exact_quota_data
          ? generate_exact_quota_dataset(data.train_meanings, data.grammar, data.vocab, rng)
          : regenerate_epoch_dataset(data.train_meanings, data.grammar, data.vocab, rng);
  write_dataset_file(train_pairs, data.vocab, out_dir / "train.txt");
  write_dataset_file(data.test_pairs, data.vocab, out_dir / "test.txt");
}

fs::path default_out_root() {
  if (const char* env = std::getenv("NELLCOM_OUT"); env != nullptr && *env != '\0')
    return fs::path(env);
  return fs::path("out");
}

}  // namespace nellcom
