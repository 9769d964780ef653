#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nellcom/errors.hpp"
#include "nellcom/training.hpp"

using namespace nellcom;

namespace {

TrainConfig tiny_config(const std::string& grammar, uint64_t seed) {
  TrainConfig cfg;
  cfg.grammar = grammar;
  cfg.seed = seed;
  cfg.n_entities = 6;
  cfg.n_actions = 4;
  cfg.sl_epochs = 3;
  cfg.rl_epochs = 3;
  cfg.batch_size = 16;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.max_len = 3;  // shorter than a marked utterance
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.grammar = "unknown";
  CHECK_THROWS_AS(prepare_data(cfg), ConfigError);
}

TEST_CASE("prepare_data is deterministic and covers inventories") {
  const TrainConfig cfg = tiny_config("flex+op", 9);
  const DataContext a = prepare_data(cfg);
  const DataContext b = prepare_data(cfg);
  CHECK(a.train_meanings == b.train_meanings);
  CHECK(a.test_pairs == b.test_pairs);
  CHECK(a.train_meanings.size() == 80);
  CHECK(a.test_meanings.size() == 40);
}

TEST_CASE("single-pair memorization reaches exact accuracy") {
  const Vocabulary vocab(6, 4);
  const GrammarSpec fix = GrammarSpec::fix_op();
  const Meaning m{1, 2, 3};
  Rng gen_rng(0);
  const Utterance gold = generate_utterance(m, fix, vocab, gen_rng);

  Rng init(5);
  SpeakerParams sp(vocab, init);
  Adam opt(sp.params(), {0.01, 0.9, 0.999, 1e-8});
  for (int step = 0; step < 60; ++step) {
    Graph g;
    g.backward(speaker_teacher_forced(g, sp, m, gold).total_ce);
    opt.step();
  }
  const SpeakerGeneration out = speaker_generate(sp, m, DecodeMode::Greedy);
  CHECK(out.tokens == gold.tokens);
  CHECK(out.ended_with_eos);
}

TEST_CASE("one supervised epoch lowers both dataset losses") {
  const TrainConfig cfg = tiny_config("fix+op", 3);
  const DataContext data = prepare_data(cfg);

  Rng s_init(derive_seed(cfg.seed, "speaker-init"));
  Rng l_init(derive_seed(cfg.seed, "listener-init"));
  SpeakerParams sp(data.vocab, s_init);
  ListenerParams lp(data.vocab, l_init);
  Adam s_opt(sp.params(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
  Adam l_opt(lp.params(), {cfg.learning_rate, 0.9, 0.999, 1e-8});

  Rng probe_rng(777);
  const auto probe =
      regenerate_epoch_dataset(data.train_meanings, data.grammar, data.vocab, probe_rng);
  const double s_before = speaker_dataset_loss(sp, probe);
  const double l_before = listener_dataset_loss(lp, probe);

  TrainConfig one = cfg;
  one.sl_epochs = 1;
  Rng s_rng(derive_seed(cfg.seed, "sl-speaker"));
  Rng l_rng(derive_seed(cfg.seed, "sl-listener"));
  const auto s_frag = train_speaker_supervised(sp, s_opt, data, one, s_rng);
  const auto l_frag = train_listener_supervised(lp, l_opt, data, one, l_rng);

  CHECK(speaker_dataset_loss(sp, probe) < s_before);
  CHECK(listener_dataset_loss(lp, probe) < l_before);
  CHECK(s_frag.size() == 1);
  CHECK(has_metric(s_frag[0], "speaker_train_loss"));
  CHECK(has_metric(l_frag[0], "listening_accuracy"));
}

TEST_CASE("reported supervised loss equals the negated log-prob sum") {
  const TrainConfig cfg = tiny_config("flex+op", 21);
  const DataContext data = prepare_data(cfg);
  Rng init(2);
  SpeakerParams sp(data.vocab, init);

  Rng data_rng(31);
  const auto pairs =
      regenerate_epoch_dataset(data.train_meanings, data.grammar, data.vocab, data_rng);
  const double loss = speaker_dataset_loss(sp, pairs);

  double logp_total = 0.0;
  for (const auto& [m, u] : pairs) {
    const SpeakerGeneration gen = speaker_generate(sp, m, DecodeMode::TeacherForced, &u);
    for (double lp : gen.step_logp) logp_total += lp;
  }
  CHECK(loss == doctest::Approx(-logp_total / double(pairs.size())).epsilon(1e-12));
}

TEST_CASE("zero reward produces zero speaker gradient") {
  const Vocabulary vocab(6, 4);
  Rng init(8);
  SpeakerParams sp(vocab, init);
  for (Tensor* t : sp.params()) t->zero_grad();

  Graph g;
  Rng sample_rng(1);
  SpeakerTrace trace =
      speaker_rollout(g, sp, Meaning{0, 1, 2}, DecodeMode::Sample, &sample_rng, 10);
  g.backward(g.scale(trace.total_ce, 0.0));  // reward == 0
  for (const Tensor* t : sp.params())
    for (double gv : t->grad) CHECK(gv == 0.0);
}

TEST_CASE("run_experiment: deterministic, contiguous, counts sum to test size") {
  const TrainConfig cfg = tiny_config("flex+op", 12);
  const ExperimentResult a = run_experiment(cfg);
  const ExperimentResult b = run_experiment(cfg);

  REQUIRE(a.trajectory.records.size() == b.trajectory.records.size());
  REQUIRE(a.trajectory.records.size() ==
          static_cast<size_t>(1 + cfg.sl_epochs + 1 + cfg.rl_epochs));
  for (size_t i = 0; i < a.trajectory.records.size(); ++i) {
    const EpochRecord& ra = a.trajectory.records[i];
    const EpochRecord& rb = b.trajectory.records[i];
    CHECK(ra.phase == rb.phase);
    CHECK(ra.epoch == rb.epoch);
    REQUIRE(ra.metrics.size() == rb.metrics.size());
    for (size_t k = 0; k < ra.metrics.size(); ++k) {
      CHECK(ra.metrics[k].first == rb.metrics[k].first);
      const double va = ra.metrics[k].second, vb = rb.metrics[k].second;
      CHECK(((std::isnan(va) && std::isnan(vb)) || va == vb));
    }
    CHECK(ra.counts == rb.counts);
  }

  // Phase-contiguous epochs starting at 0.
  int expected_epoch = 0;
  std::string phase = "sl";
  for (const EpochRecord& rec : a.trajectory.records) {
    if (rec.phase != phase) {
      phase = rec.phase;
      expected_epoch = 0;
    }
    CHECK(rec.epoch == expected_epoch);
    ++expected_epoch;
    if (rec.has_counts) {
      size_t total = 0;
      for (size_t c : rec.counts) total += c;
      CHECK(total == a.data.test_meanings.size());
    }
  }

  // Communication records carry reconstruction and reward metrics.
  const EpochRecord& rl_last = a.trajectory.at("rl", cfg.rl_epochs);
  CHECK(has_metric(rl_last, "reconstruction_accuracy"));
  CHECK(has_metric(rl_last, "reconstruction_accuracy_train"));
  CHECK(has_metric(rl_last, "mean_reward"));
  CHECK(has_metric(a.trajectory.at("rl", 0), "reconstruction_accuracy"));
}

TEST_CASE("frozen listener stays untouched during communication") {
  TrainConfig cfg = tiny_config("fix+op", 4);
  cfg.freeze_listener_rl = true;
  cfg.sl_epochs = 1;
  cfg.rl_epochs = 2;
  const DataContext data = prepare_data(cfg);

  Rng s_init(1), l_init(2);
  SpeakerParams sp(data.vocab, s_init);
  ListenerParams lp(data.vocab, l_init);
  Adam s_opt(sp.params(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
  Adam l_opt(lp.params(), {cfg.learning_rate, 0.9, 0.999, 1e-8});

  std::vector<std::vector<double>> before;
  for (const Tensor* t : lp.params()) before.push_back(t->value);

  Rng rl_rng(3);
  train_communication(sp, lp, s_opt, l_opt, data, cfg, rl_rng);

  size_t i = 0;
  for (const Tensor* t : lp.params()) CHECK(t->value == before[i++]);
  CHECK(l_opt.step_count() == 0);
}

TEST_CASE("REINFORCE toy: speaker converges to the reward maximizer") {
  // Two meanings, two candidate utterances each (marked/unmarked SOV). The
  // frozen oracle listener is a lookup with well-separated log-probability
  // rewards that prefer the marked form. The speaker starts supervised on
  // the 50/50 optional-marking language (communication always follows
  // supervised learning) and must shift to the rewarded form within 500
  // updates.
  const Vocabulary vocab(2, 1);
  const GrammarSpec optional_mk{"optional", 1.0, 0.5};
  const auto meanings = enumerate_meaning_space(2, 1);
  REQUIRE(meanings.size() == 2);
  const int max_len = 4;

  const auto oracle_reward = [&](const Meaning& m, const std::vector<int>& toks) {
    const Utterance u{toks};
    if (u == render_utterance(m, Order::SOV, true, vocab)) return -0.05;
    if (u == render_utterance(m, Order::SOV, false, vocab)) return -0.7;
    return -3.0;
  };

  // Brute force over every emittable token sequence confirms the marked
  // form is the unique reward maximizer.
  for (const Meaning& m : meanings) {
    const Utterance best = render_utterance(m, Order::SOV, true, vocab);
    std::vector<std::vector<int>> frontier = {{}};
    for (int len = 0; len < max_len; ++len) {
      std::vector<std::vector<int>> next;
      for (const auto& seq : frontier) {
        CHECK((Utterance{seq} == best || oracle_reward(m, seq) < oracle_reward(m, best.tokens)));
        for (int t = 0; t < vocab.content_size(); ++t) {
          auto ext = seq;
          ext.push_back(t);
          next.push_back(std::move(ext));
        }
      }
      frontier = std::move(next);
    }
  }

  int successes = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng s_init(derive_seed(seed, "toy-speaker"));
    SpeakerParams sp(vocab, s_init);
    Adam s_opt(sp.params(), {0.01, 0.9, 0.999, 1e-8});

    // Supervised start: both candidate forms roughly equally probable.
    Rng sl_rng(derive_seed(seed, "toy-sl"));
    for (int epoch = 0; epoch < 40; ++epoch) {
      Graph g;
      Graph::Var total{};
      for (const Meaning& m : meanings) {
        const Utterance u = generate_utterance(m, optional_mk, vocab, sl_rng);
        SpeakerTrace t = speaker_teacher_forced(g, sp, m, u);
        total = total.valid() ? g.add(total, t.total_ce) : t.total_ce;
      }
      g.backward(g.scale(total, 0.5));
      s_opt.step();
    }

    // Steps-to-convergence protocol: train until the greedy policy has
    // matched the brute-force optimum on five consecutive checks; fail a
    // seed that needs 500 updates or more. A running-mean baseline keeps
    // the advantage signed (raw log-probability rewards are all negative,
    // which is exactly the high-variance regime that destabilizes late
    // training).
    Rng rl_rng(derive_seed(seed, "toy-rl"));
    double baseline_sum = 0.0;
    int baseline_n = 0;
    int consecutive = 0;
    for (int step = 0; step < 500 && consecutive < 5; ++step) {
      Graph gs;
      Graph::Var sum{};
      for (const Meaning& m : meanings) {
        SpeakerTrace t = speaker_rollout(gs, sp, m, DecodeMode::Sample, &rl_rng, max_len);
        const double r = oracle_reward(m, t.tokens);
        const double b = baseline_n > 0 ? baseline_sum / baseline_n : 0.0;
        Graph::Var term = gs.scale(t.total_ce, r - b);
        sum = sum.valid() ? gs.add(sum, term) : term;
        baseline_sum += r;
        baseline_n += 1;
      }
      gs.backward(gs.scale(sum, 0.5));
      s_opt.step();

      bool at_optimum = true;
      for (const Meaning& m : meanings) {
        const SpeakerGeneration out =
            speaker_generate(sp, m, DecodeMode::Greedy, nullptr, nullptr, max_len);
        if (Utterance{out.tokens} != render_utterance(m, Order::SOV, true, vocab))
          at_optimum = false;
      }
      consecutive = at_optimum ? consecutive + 1 : 0;
    }
    if (consecutive >= 5) ++successes;
  }
  CHECK(successes >= 9);
}

TEST_CASE("exact-quota epoch data runs end to end") {
  TrainConfig cfg = tiny_config("flex+op", 2);
  cfg.exact_quota_data = true;
  cfg.sl_epochs = 2;
  cfg.rl_epochs = 0;
  const ExperimentResult result = run_experiment(cfg);
  CHECK(result.trajectory.records.size() == static_cast<size_t>(1 + 2 + 1));
}
