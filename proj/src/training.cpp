#include "nellcom/training.hpp"

#include <cmath>
#include <limits>

#include "nellcom/errors.hpp"

namespace nellcom {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void TrainConfig::validate() const {
  if (n_entities < 2) throw ConfigError("config: n_entities must be >= 2");
  if (n_actions < 1) throw ConfigError("config: n_actions must be >= 1");
  if (sl_epochs < 0 || rl_epochs < 0) throw ConfigError("config: negative epoch count");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("config: learning_rate must be positive");
  if (max_len < 4) throw ConfigError("config: max_len must be >= 4 (longest canonical form)");
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw ConfigError("config: train_fraction must lie strictly between 0 and 1");
}

double get_metric(const EpochRecord& rec, const std::string& name) {
  for (const auto& [k, v] : rec.metrics)
    if (k == name) return v;
  throw DataError("metric '" + name + "' not recorded for " + rec.phase + " epoch " +
                  std::to_string(rec.epoch));
}

bool has_metric(const EpochRecord& rec, const std::string& name) {
  for (const auto& [k, v] : rec.metrics)
    if (k == name) return true;
  return false;
}

const EpochRecord& RunTrajectory::at(const std::string& phase, int epoch) const {
  for (const EpochRecord& r : records)
    if (r.phase == phase && r.epoch == epoch) return r;
  throw DataError("trajectory has no record for " + phase + " epoch " + std::to_string(epoch));
}

DataContext prepare_data(const TrainConfig& cfg) {
  cfg.validate();
  Vocabulary vocab(cfg.n_entities, cfg.n_actions);
  GrammarSpec grammar = GrammarSpec::resolve(cfg.grammar);
  const std::vector<Meaning> space = enumerate_meaning_space(cfg.n_entities, cfg.n_actions);

  Rng split_rng(derive_seed(cfg.seed, "split"));
  auto [train, test] = split_dataset(space, cfg.train_fraction, cfg.n_entities, cfg.n_actions,
                                     split_rng);

  Rng gold_rng(derive_seed(cfg.seed, "test-gold"));
  std::vector<std::pair<Meaning, Utterance>> test_pairs =
      regenerate_epoch_dataset(test, grammar, vocab, gold_rng);

  return {std::move(vocab), std::move(grammar), std::move(train), std::move(test),
          std::move(test_pairs)};
}

EpochRecord evaluate_epoch(const std::string& phase, int epoch, const SpeakerParams& sp,
                           const ListenerParams* lp, const DataContext& data,
                           const TrainConfig& cfg, bool with_reconstruction) {
  EpochRecord rec;
  rec.phase = phase;
  rec.epoch = epoch;

  if (lp != nullptr)
    rec.set("listening_accuracy", listening_accuracy(*lp, data.test_pairs, data.vocab));
  rec.set("speaking_accuracy_exact",
          speaking_accuracy_exact(sp, data.test_pairs, data.vocab, cfg.max_len));
  rec.set("speaking_accuracy_permissive",
          permissive_speaking_accuracy(sp, data.test_meanings, data.grammar, data.vocab,
                                       cfg.max_len));
  if (with_reconstruction && lp != nullptr) {
    rec.set("reconstruction_accuracy",
            reconstruction_accuracy(sp, *lp, data.test_meanings, data.vocab, cfg.max_len));
    rec.set("reconstruction_accuracy_train",
            reconstruction_accuracy(sp, *lp, data.train_meanings, data.vocab, cfg.max_len));
  }

  // Production preferences sample the speaker's distribution, one utterance
  // per unseen meaning, on a per-epoch stream independent of training.
  Rng production_rng(derive_seed(cfg.seed, "eval-" + phase, static_cast<uint64_t>(epoch)));
  const std::vector<ProductionRecord> records = produce_records(
      sp, data.test_meanings, data.grammar, data.vocab, cfg.max_len, &production_rng);
  const ProductionProportions props = production_proportions(records);
  rec.set("prop_sov", props.sov);
  rec.set("prop_osv", props.osv);
  rec.set("prop_with_mk", props.with_mk);
  rec.set("prop_no_mk", props.no_mk);
  rec.set("prop_other", props.other);
  const ConditionalMarking cond = conditional_marking(records);
  rec.set("cond_mark_sov", cond.sov.value_or(kNaN));
  rec.set("cond_mark_osv", cond.osv.value_or(kNaN));
  rec.set("effort", production_effort(records));
  try {
    rec.set("uncertainty_h", uncertainty(records));
  } catch (const DataError&) {
    rec.set("uncertainty_h", kNaN);  // every production unclassifiable
  }
  rec.counts = class_counts(records);
  rec.has_counts = true;
  return rec;
}

namespace {

std::vector<std::pair<Meaning, Utterance>> epoch_dataset(const DataContext& data,
                                                         const TrainConfig& cfg, Rng& rng) {
  auto pairs = cfg.exact_quota_data
                   ? generate_exact_quota_dataset(data.train_meanings, data.grammar, data.vocab,
                                                  rng)
                   : regenerate_epoch_dataset(data.train_meanings, data.grammar, data.vocab, rng);
  rng.shuffle(pairs);
  return pairs;
}

}  // namespace

double speaker_dataset_loss(SpeakerParams& sp,
                            const std::vector<std::pair<Meaning, Utterance>>& data) {
  double total = 0.0;
  for (const auto& [m, u] : data) {
    Graph g;
    total += g.scalar(speaker_teacher_forced(g, sp, m, u).total_ce);
  }
  return total / static_cast<double>(data.size());
}

double listener_dataset_loss(ListenerParams& lp,
                             const std::vector<std::pair<Meaning, Utterance>>& data) {
  double total = 0.0;
  for (const auto& [m, u] : data) {
    Graph g;
    total += g.scalar(listener_loss(g, listener_trace(g, lp, u.tokens), m));
  }
  return total / static_cast<double>(data.size());
}

std::vector<EpochRecord> train_speaker_supervised(SpeakerParams& sp, Adam& opt,
                                                  const DataContext& data,
                                                  const TrainConfig& cfg, Rng& rng) {
  if (data.train_meanings.empty()) throw DataError("train_speaker_supervised: empty dataset");
  std::vector<EpochRecord> fragment;
  fragment.reserve(cfg.sl_epochs);
  for (int epoch = 1; epoch <= cfg.sl_epochs; ++epoch) {
    const auto pairs = epoch_dataset(data, cfg, rng);
    double loss_sum = 0.0;
    for (size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
      const size_t end = std::min(pairs.size(), start + cfg.batch_size);
      Graph g;
      Graph::Var batch_ce{};
      for (size_t i = start; i < end; ++i) {
        SpeakerTrace t = speaker_teacher_forced(g, sp, pairs[i].first, pairs[i].second);
        loss_sum += g.scalar(t.total_ce);
        batch_ce = batch_ce.valid() ? g.add(batch_ce, t.total_ce) : t.total_ce;
      }
      g.backward(g.scale(batch_ce, 1.0 / static_cast<double>(end - start)));
      if (cfg.grad_clip_norm > 0) clip_gradient_norm(sp.params(), cfg.grad_clip_norm);
      opt.step();
    }
    EpochRecord rec = evaluate_epoch("sl", epoch, sp, nullptr, data, cfg, false);
    rec.set("speaker_train_loss", loss_sum / static_cast<double>(pairs.size()));
    fragment.push_back(std::move(rec));
  }
  return fragment;
}

std::vector<EpochRecord> train_listener_supervised(ListenerParams& lp, Adam& opt,
                                                   const DataContext& data,
                                                   const TrainConfig& cfg, Rng& rng) {
  if (data.train_meanings.empty()) throw DataError("train_listener_supervised: empty dataset");
  std::vector<EpochRecord> fragment;
  fragment.reserve(cfg.sl_epochs);
  for (int epoch = 1; epoch <= cfg.sl_epochs; ++epoch) {
    const auto pairs = epoch_dataset(data, cfg, rng);
    double loss_sum = 0.0;
    for (size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
      const size_t end = std::min(pairs.size(), start + cfg.batch_size);
      Graph g;
      Graph::Var batch_ce{};
      for (size_t i = start; i < end; ++i) {
        Graph::Var ce =
            listener_loss(g, listener_trace(g, lp, pairs[i].second.tokens), pairs[i].first);
        loss_sum += g.scalar(ce);
        batch_ce = batch_ce.valid() ? g.add(batch_ce, ce) : ce;
      }
      g.backward(g.scale(batch_ce, 1.0 / static_cast<double>(end - start)));
      if (cfg.grad_clip_norm > 0) clip_gradient_norm(lp.params(), cfg.grad_clip_norm);
      opt.step();
    }
    EpochRecord rec;
    rec.phase = "sl";
    rec.epoch = epoch;
    rec.set("listening_accuracy", listening_accuracy(lp, data.test_pairs, data.vocab));
    rec.set("listener_train_loss", loss_sum / static_cast<double>(pairs.size()));
    fragment.push_back(std::move(rec));
  }
  return fragment;
}

std::vector<EpochRecord> train_communication(SpeakerParams& sp, ListenerParams& lp,
                                             Adam& speaker_opt, Adam& listener_opt,
                                             const DataContext& data, const TrainConfig& cfg,
                                             Rng& rng) {
  if (data.train_meanings.empty()) throw DataError("train_communication: empty dataset");
  std::vector<EpochRecord> fragment;
  fragment.reserve(cfg.rl_epochs);
  // Running mean of every reward seen so far. Its slow adaptation is what
  // pulls a degrading protocol back: mid-run garbage scores far below the
  // historic level and is suppressed relative to it.
  double baseline_sum = 0.0;
  int64_t baseline_n = 0;

  for (int epoch = 1; epoch <= cfg.rl_epochs; ++epoch) {
    std::vector<Meaning> order = data.train_meanings;
    rng.shuffle(order);
    double reward_sum = 0.0;

    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      Graph gs, gl;
      Graph::Var speaker_sum{}, listener_sum{};

      for (size_t i = start; i < end; ++i) {
        const Meaning& m = order[i];
        SpeakerTrace t = speaker_rollout(gs, sp, m, DecodeMode::Sample, &rng, cfg.max_len);
        Graph::Var ce = listener_loss(gl, listener_trace(gl, lp, t.tokens), m);
        const double reward = -gl.scalar(ce);
        reward_sum += reward;

        const double baseline =
            cfg.reward_baseline && baseline_n > 0
                ? baseline_sum / static_cast<double>(baseline_n)
                : 0.0;
        // Loss_S = -(r - b) * sum(log p) = (r - b) * total_ce, r constant.
        Graph::Var term = gs.scale(t.total_ce, reward - baseline);
        speaker_sum = speaker_sum.valid() ? gs.add(speaker_sum, term) : term;
        listener_sum = listener_sum.valid() ? gl.add(listener_sum, ce) : ce;
        baseline_sum += reward;
        baseline_n += 1;
      }

      gs.backward(gs.scale(speaker_sum, inv_batch));
      if (cfg.grad_clip_norm > 0) clip_gradient_norm(sp.params(), cfg.grad_clip_norm);
      speaker_opt.step();
      if (!cfg.freeze_listener_rl) {
        gl.backward(gl.scale(listener_sum, inv_batch));
        if (cfg.grad_clip_norm > 0) clip_gradient_norm(lp.params(), cfg.grad_clip_norm);
        listener_opt.step();
      }
    }

    EpochRecord rec = evaluate_epoch("rl", epoch, sp, &lp, data, cfg, true);
    rec.set("mean_reward", reward_sum / static_cast<double>(order.size()));
    fragment.push_back(std::move(rec));
  }
  return fragment;
}

namespace {

// Listener fragments carry only listening metrics; fold them into the
// speaker's records for the same epoch.
std::vector<EpochRecord> merge_sl_fragments(std::vector<EpochRecord> speaker_frag,
                                            const std::vector<EpochRecord>& listener_frag) {
  if (speaker_frag.size() != listener_frag.size())
    throw DataError("supervised fragments disagree on epoch count");
  for (size_t i = 0; i < speaker_frag.size(); ++i) {
    if (speaker_frag[i].epoch != listener_frag[i].epoch)
      throw DataError("supervised fragments disagree on epoch numbering");
    for (const auto& kv : listener_frag[i].metrics)
      speaker_frag[i].metrics.push_back(kv);
  }
  return speaker_frag;
}

}  // namespace

ExperimentResult run_experiment(const TrainConfig& cfg) {
  cfg.validate();
  DataContext data = prepare_data(cfg);

  Rng speaker_init(derive_seed(cfg.seed, "speaker-init"));
  Rng listener_init(derive_seed(cfg.seed, "listener-init"));
  SpeakerParams speaker(data.vocab, speaker_init);
  ListenerParams listener(data.vocab, listener_init);

  const AdamConfig adam_cfg{cfg.learning_rate, 0.9, 0.999, 1e-8};
  Adam speaker_opt(speaker.params(), adam_cfg);
  Adam listener_opt(listener.params(), adam_cfg);

  RunTrajectory traj;
  traj.config = cfg;

  traj.records.push_back(evaluate_epoch("sl", 0, speaker, &listener, data, cfg, false));

  Rng sl_speaker_rng(derive_seed(cfg.seed, "sl-speaker"));
  Rng sl_listener_rng(derive_seed(cfg.seed, "sl-listener"));
  auto speaker_frag = train_speaker_supervised(speaker, speaker_opt, data, cfg, sl_speaker_rng);
  auto listener_frag =
      train_listener_supervised(listener, listener_opt, data, cfg, sl_listener_rng);
  for (EpochRecord& rec : merge_sl_fragments(std::move(speaker_frag), listener_frag))
    traj.records.push_back(std::move(rec));

  SpeakerParams speaker_end_sl = speaker;
  ListenerParams listener_end_sl = listener;
  const int64_t speaker_steps_sl = speaker_opt.step_count();
  const int64_t listener_steps_sl = listener_opt.step_count();

  // rl epoch 0 is the end-of-SL snapshot, before any communication update.
  traj.records.push_back(evaluate_epoch("rl", 0, speaker, &listener, data, cfg, true));

  // The communication phase is a separate training procedure: fresh
  // optimizer state. Stale second moments from converged supervised
  // training would otherwise amplify the first policy gradients by orders
  // of magnitude.
  Adam speaker_rl_opt(speaker.params(), adam_cfg);
  Adam listener_rl_opt(listener.params(), adam_cfg);

  Rng rl_rng(derive_seed(cfg.seed, "rl"));
  for (EpochRecord& rec : train_communication(speaker, listener, speaker_rl_opt,
                                              listener_rl_opt, data, cfg, rl_rng))
    traj.records.push_back(std::move(rec));

  return {std::move(traj),
          std::move(speaker),
          std::move(listener),
          std::move(speaker_end_sl),
          std::move(listener_end_sl),
          std::move(data),
          speaker_rl_opt.step_count(),
          listener_rl_opt.step_count(),
          speaker_steps_sl,
          listener_steps_sl};
}

}  // namespace nellcom
