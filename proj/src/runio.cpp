#include "nellcom/runio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "nellcom/errors.hpp"

namespace nellcom {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  return {{"grammar", cfg.grammar},
          {"seed", cfg.seed},
          {"n_entities", cfg.n_entities},
          {"n_actions", cfg.n_actions},
          {"train_fraction", cfg.train_fraction},
          {"sl_epochs", cfg.sl_epochs},
          {"rl_epochs", cfg.rl_epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"max_len", cfg.max_len},
          {"reward_baseline", cfg.reward_baseline},
          {"exact_quota_data", cfg.exact_quota_data},
          {"freeze_listener_rl", cfg.freeze_listener_rl},
          {"grad_clip_norm", cfg.grad_clip_norm}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  try {
    cfg.grammar = j.value("grammar", cfg.grammar);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.n_entities = j.value("n_entities", cfg.n_entities);
    cfg.n_actions = j.value("n_actions", cfg.n_actions);
    cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
    cfg.sl_epochs = j.value("sl_epochs", cfg.sl_epochs);
    cfg.rl_epochs = j.value("rl_epochs", cfg.rl_epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.max_len = j.value("max_len", cfg.max_len);
    cfg.reward_baseline = j.value("reward_baseline", cfg.reward_baseline);
    cfg.exact_quota_data = j.value("exact_quota_data", cfg.exact_quota_data);
    cfg.freeze_listener_rl = j.value("freeze_listener_rl", cfg.freeze_listener_rl);
    cfg.grad_clip_norm = j.value("grad_clip_norm", cfg.grad_clip_norm);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid config JSON in '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

namespace {

const std::array<std::string, 5> kCountMetricNames = {
    "count_sov_no_mk", "count_sov_mk", "count_osv_no_mk", "count_osv_mk", "count_other"};

}  // namespace

void write_trajectory_csv(const RunTrajectory& traj, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary: no newline translation
  if (!out) throw DataError("cannot write trajectory '" + path.string() + "'");
  out << "phase,epoch,metric,value\n";
  for (const EpochRecord& rec : traj.records) {
    for (const auto& [name, value] : rec.metrics)
      out << rec.phase << ',' << rec.epoch << ',' << name << ',' << format_double(value) << '\n';
    if (rec.has_counts) {
      for (size_t c = 0; c < 5; ++c)
        out << rec.phase << ',' << rec.epoch << ',' << kCountMetricNames[c] << ','
            << rec.counts[c] << '\n';
    }
  }
}

std::vector<EpochRecord> read_trajectory_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read trajectory '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "phase,epoch,metric,value")
    throw DataError("trajectory '" + path.string() + "' has an unexpected header");

  std::vector<EpochRecord> records;
  const auto record_for = [&](const std::string& phase, int epoch) -> EpochRecord& {
    if (!records.empty() && records.back().phase == phase && records.back().epoch == epoch)
      return records.back();
    records.push_back({phase, epoch, {}, {}, false});
    return records.back();
  };

  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t c1 = line.find(',');
    const size_t c2 = line.find(',', c1 + 1);
    const size_t c3 = line.find(',', c2 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos)
      throw DataError("trajectory '" + path.string() + "': malformed line " +
                      std::to_string(line_no));
    const std::string phase = line.substr(0, c1);
    const int epoch = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
    const std::string metric = line.substr(c2 + 1, c3 - c2 - 1);
    const std::string value_text = line.substr(c3 + 1);
    EpochRecord& rec = record_for(phase, epoch);

    bool is_count = false;
    for (size_t c = 0; c < 5; ++c) {
      if (metric == kCountMetricNames[c]) {
        rec.counts[c] = static_cast<size_t>(std::stoull(value_text));
        rec.has_counts = true;
        is_count = true;
        break;
      }
    }
    if (!is_count) rec.set(metric, std::strtod(value_text.c_str(), nullptr));
  }
  return records;
}

bool is_completed_run_dir(const fs::path& dir) {
  return fs::exists(dir / "summary.json") && fs::exists(dir / "trajectory.csv");
}

RunArtifacts load_run(const fs::path& dir) {
  if (!is_completed_run_dir(dir))
    throw DataError("'" + dir.string() + "' is not a completed run directory");
  std::ifstream in(dir / "summary.json");
  nlohmann::json summary;
  try {
    in >> summary;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid summary in '" + dir.string() + "': " + e.what());
  }
  RunArtifacts art;
  art.dir = dir;
  art.summary = summary;
  art.config = config_from_json(summary.at("config"));
  art.trajectory.config = art.config;
  art.trajectory.records = read_trajectory_csv(dir / "trajectory.csv");
  return art;
}

std::vector<fs::path> find_run_dirs(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_directory() && is_completed_run_dir(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path fresh_run_dir(const fs::path& base) {
  if (!is_completed_run_dir(base)) return base;
  for (int n = 2;; ++n) {
    fs::path candidate = base;
    candidate += "-r" + std::to_string(n);
    if (!is_completed_run_dir(candidate)) return candidate;
  }
}

void write_dataset_file(const std::vector<std::pair<Meaning, Utterance>>& pairs,
                        const Vocabulary& v, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  for (const auto& [m, u] : pairs) out << dataset_line(m, u, v) << '\n';
}

std::vector<std::pair<Meaning, Utterance>> read_dataset_file(const fs::path& path,
                                                             const Vocabulary& v) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read dataset '" + path.string() + "'");
  std::vector<std::pair<Meaning, Utterance>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_dataset_line(line, v));
  }
  return out;
}

}  // namespace nellcom
