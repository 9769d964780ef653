#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nellcom/agents.hpp"
#include "nellcom/grammar.hpp"
#include "nellcom/metrics.hpp"

namespace nellcom {

struct TrainConfig {
  std::string grammar = "flex+op";
  uint64_t seed = 0;
  int n_entities = 10;
  int n_actions = 8;
  double train_fraction = 2.0 / 3.0;
  int sl_epochs = 60;
  int rl_epochs = 60;
  int batch_size = 32;
  double learning_rate = 0.01;
  int max_len = 10;
  // Subtract a moving-average reward baseline in the speaker's REINFORCE
  // update. The raw log-probability reward is always negative; without the
  // baseline the communication phase reliably collapses within a few
  // epochs. Disable to study exactly that collapse.
  bool reward_baseline = true;
  // Regenerate epoch data with exact order/marking quotas instead of
  // independent Bernoulli draws per utterance.
  bool exact_quota_data = false;
  // Keep the listener frozen during the communication phase (ablation and
  // oracle-listener experiments).
  bool freeze_listener_rl = false;
  // Global gradient-norm clip applied before every optimizer step; 0
  // disables. Inactive in practice during supervised training; during
  // communication it tames the outlier policy gradients from long
  // ill-formed rollouts (advantage x sequence length spikes).
  double grad_clip_norm = 3.0;

  void validate() const;
};

struct EpochRecord {
  std::string phase;  // "sl" or "rl"
  int epoch = 0;
  std::vector<std::pair<std::string, double>> metrics;
  std::array<size_t, 5> counts{};  // test-set production classes
  bool has_counts = false;

  void set(const std::string& name, double value) { metrics.emplace_back(name, value); }
};

// Returns NaN for metrics recorded as undefined; throws DataError when the
// metric was never recorded for this epoch.
double get_metric(const EpochRecord& rec, const std::string& name);
bool has_metric(const EpochRecord& rec, const std::string& name);

struct RunTrajectory {
  TrainConfig config;
  std::vector<EpochRecord> records;

  const EpochRecord& at(const std::string& phase, int epoch) const;
};

// Split, fixed test gold pairs and vocabulary for one run. All randomness
// is derived from config.seed via labeled streams.
struct DataContext {
  Vocabulary vocab;
  GrammarSpec grammar;
  std::vector<Meaning> train_meanings;
  std::vector<Meaning> test_meanings;
  std::vector<std::pair<Meaning, Utterance>> test_pairs;
};

DataContext prepare_data(const TrainConfig& cfg);

// Speaker-side evaluation on the unseen test set (speaking accuracies plus
// production statistics); listener/reconstruction metrics are appended when
// the corresponding agent is supplied.
EpochRecord evaluate_epoch(const std::string& phase, int epoch, const SpeakerParams& sp,
                           const ListenerParams* lp, const DataContext& data,
                           const TrainConfig& cfg, bool with_reconstruction);

// One supervised phase for the speaker: per epoch, regenerate utterances,
// shuffle, minimize teacher-forced cross-entropy in minibatches, evaluate.
// Returns records for epochs 1..sl_epochs.
std::vector<EpochRecord> train_speaker_supervised(SpeakerParams& sp, Adam& opt,
                                                  const DataContext& data,
                                                  const TrainConfig& cfg, Rng& rng);

std::vector<EpochRecord> train_listener_supervised(ListenerParams& lp, Adam& opt,
                                                   const DataContext& data,
                                                   const TrainConfig& cfg, Rng& rng);

// Communication phase: the speaker samples an utterance per meaning, the
// listener scores it; the shared reward is the listener's summed
// log-probability of the true meaning. The speaker takes a REINFORCE step
// with the reward as a constant factor, the listener minimizes its own
// cross-entropy on the sampled utterance. Returns records for epochs
// 1..rl_epochs.
std::vector<EpochRecord> train_communication(SpeakerParams& sp, ListenerParams& lp,
                                             Adam& speaker_opt, Adam& listener_opt,
                                             const DataContext& data, const TrainConfig& cfg,
                                             Rng& rng);

// Mean teacher-forced speaker loss over a dataset, no updates.
double speaker_dataset_loss(SpeakerParams& sp, const std::vector<std::pair<Meaning, Utterance>>& data);
double listener_dataset_loss(ListenerParams& lp, const std::vector<std::pair<Meaning, Utterance>>& data);

// Full pipeline: split -> SL (speaker and listener independently) -> RL
// (jointly), evaluating on the unseen test meanings at every epoch.
// Deterministic given the config. Checkpoint writing is the harness's job.
struct ExperimentResult {
  RunTrajectory trajectory;
  SpeakerParams speaker;
  ListenerParams listener;
  SpeakerParams speaker_end_sl;    // phase-boundary snapshots for checkpoints
  ListenerParams listener_end_sl;
  DataContext data;
  int64_t speaker_steps = 0;
  int64_t listener_steps = 0;
  int64_t speaker_steps_sl = 0;
  int64_t listener_steps_sl = 0;
};

ExperimentResult run_experiment(const TrainConfig& cfg);

}  // namespace nellcom
