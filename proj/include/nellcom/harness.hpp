#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nellcom/aggregate.hpp"
#include "nellcom/runio.hpp"
#include "nellcom/training.hpp"

namespace nellcom {

struct RunOutcome {
  std::filesystem::path dir;
  nlohmann::json summary;
};

// Runs one experiment and writes the full artifact set: trajectory.csv,
// summary.json, phase-boundary checkpoints and a manifest.json sidecar (the
// only file carrying timestamps). `seed_index` labels the directory; the rng
// stream seed lives in cfg.seed.
RunOutcome execute_run(const TrainConfig& cfg, int seed_index,
                       const std::filesystem::path& out_root, bool quiet = true);

struct SweepConfig {
  std::vector<std::string> grammars = {"fix+op", "flex+op"};
  std::vector<int> seed_indices;  // empty: 0..19
  uint64_t master_seed = 0;
  TrainConfig base;
  std::filesystem::path out_root;
  int jobs = 0;  // 0: hardware concurrency
  bool quiet = false;
};

struct SweepResult {
  std::vector<std::filesystem::path> run_dirs;
  std::filesystem::path aggregate_dir;
};

// Executes every (grammar, seed) cell, optionally in parallel, then
// aggregates. Cell streams derive from (master seed, grammar, seed index).
SweepResult run_sweep(const SweepConfig& cfg);

// Recomputes evaluation metrics from the checkpoints of a completed run.
nlohmann::json evaluate_checkpoints(const std::filesystem::path& run_dir,
                                    const std::string& phase);

// Writes train.txt / test.txt under out_dir for the configured grammar.
void write_dataset_files(const TrainConfig& cfg, const std::filesystem::path& out_dir);

// Default output root: $NELLCOM_OUT or ./out.
std::filesystem::path default_out_root();

// Full command-line interface (subcommands gen-data, train, evaluate,
// analyze, plot, sweep). Returns the process exit status: 0 ok, 2 config
// error, 3 data error, 4 checkpoint error.
int cli_run(const std::vector<std::string>& args);

}  // namespace nellcom
