#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nellcom/runio.hpp"

namespace nellcom {

struct MetricStats {
  double mean = 0.0;
  double sd = 0.0;
  size_t n = 0;  // runs with a defined (non-NaN) value
};

struct SeedPoint {
  int seed_index = 0;
  double h = 0.0;
  double e = 0.0;
};

// Cross-seed statistics for one grammar. Keys are (phase, epoch, metric);
// per_epoch preserves the epoch ordering of the underlying trajectories.
struct AggregateResult {
  std::string grammar;
  size_t n_runs = 0;
  // (phase, epoch) in trajectory order; every run must have exactly these.
  std::vector<std::pair<std::string, int>> epochs;
  std::map<std::string, std::map<int, std::map<std::string, MetricStats>>> stats;
  std::vector<SeedPoint> final_points;   // per-seed final (H, E)
  double initial_h = 0.0;
  double initial_e = 0.0;

  const MetricStats& at(const std::string& phase, int epoch, const std::string& metric) const;
};

// Rejects mixed-grammar input and any run whose (phase, epoch, metric) keys
// differ from the first run's.
AggregateResult aggregate(const std::vector<RunArtifacts>& runs);

// Groups runs under `root` by grammar, aggregates each group and writes
// aggregate/<grammar>/metrics_mean.csv, aggregate/tradeoff.csv and
// aggregate/aggregate.json. Returns the aggregate directory.
std::filesystem::path analyze_runs(const std::filesystem::path& root,
                                   const std::filesystem::path& out_dir);

std::vector<AggregateResult> aggregate_by_grammar(const std::vector<RunArtifacts>& runs);

}  // namespace nellcom
