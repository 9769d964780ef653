#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nellcom/training.hpp"

namespace nellcom {

// Deterministic float formatting used in every artifact ("%.17g":
// round-trippable, byte-stable for identical doubles).
std::string format_double(double v);

nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config_file(const std::filesystem::path& path);

// trajectory.csv: "phase,epoch,metric,value" rows, epochs in order, class
// counts serialized as count_* metrics.
void write_trajectory_csv(const RunTrajectory& traj, const std::filesystem::path& path);
std::vector<EpochRecord> read_trajectory_csv(const std::filesystem::path& path);

struct RunArtifacts {
  std::filesystem::path dir;
  TrainConfig config;
  nlohmann::json summary;
  RunTrajectory trajectory;
};

bool is_completed_run_dir(const std::filesystem::path& dir);
RunArtifacts load_run(const std::filesystem::path& dir);

// All completed run directories under a root, sorted by path.
std::vector<std::filesystem::path> find_run_dirs(const std::filesystem::path& root);

// Completed run directories are never reused: picks `base` if absent or
// incomplete, otherwise the first free "-rN" sibling.
std::filesystem::path fresh_run_dir(const std::filesystem::path& base);

// "action agent patient<TAB>token token ..." lines.
void write_dataset_file(const std::vector<std::pair<Meaning, Utterance>>& pairs,
                        const Vocabulary& v, const std::filesystem::path& path);
std::vector<std::pair<Meaning, Utterance>> read_dataset_file(const std::filesystem::path& path,
                                                             const Vocabulary& v);

}  // namespace nellcom
