#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "nellcom/agents.hpp"
#include "nellcom/checkpoint.hpp"
#include "nellcom/errors.hpp"
#include "testutil.hpp"

using namespace nellcom;
using nellcom::test::fd_max_rel_err;

namespace {

const Vocabulary kVocab(6, 4);
const Meaning kMeaning{2, 1, 4};

SpeakerParams small_speaker(uint64_t seed = 1) {
  Rng rng(seed);
  return SpeakerParams(kVocab, rng, 4, 12);
}

ListenerParams small_listener(uint64_t seed = 2) {
  Rng rng(seed);
  return ListenerParams(kVocab, rng, 8, 8);
}

}  // namespace

TEST_CASE("speaker_encode: zero parameters give a zero vector") {
  SpeakerParams sp = small_speaker();
  for (Tensor* t : sp.params()) std::fill(t->value.begin(), t->value.end(), 0.0);
  Graph g;
  const auto& v = g.value(speaker_encode_var(g, sp, kMeaning));
  for (double x : v) CHECK(x == 0.0);
}

TEST_CASE("speaker_encode: slots are named, not positional") {
  SpeakerParams sp = small_speaker();
  Graph g1, g2;
  Meaning a;
  a.action = 2;
  a.agent = 1;
  a.patient = 4;
  Meaning b;
  b.patient = 4;  // assigned in a different order; same named slots
  b.agent = 1;
  b.action = 2;
  CHECK(g1.value(speaker_encode_var(g1, sp, a)) == g2.value(speaker_encode_var(g2, sp, b)));

  // Distinct slot contents do change the encoding: the attribute tables are
  // separate, so swapping agent and patient is visible.
  Meaning swapped{2, 4, 1};
  Graph g3;
  CHECK(g3.value(speaker_encode_var(g3, sp, swapped)) !=
        g1.value(speaker_encode_var(g1, sp, a)));

  CHECK_THROWS_AS(speaker_encode_var(g1, sp, Meaning{99, 0, 1}), DataError);
}

TEST_CASE("teacher forcing: log-probs negate the loss, eos included") {
  SpeakerParams sp = small_speaker(7);
  const Utterance gold = utterance_from_text("noun-2 mk noun-5 verb-3", kVocab);

  SpeakerGeneration gen = speaker_generate(sp, kMeaning, DecodeMode::TeacherForced, &gold);
  CHECK(gen.tokens == gold.tokens);
  CHECK(gen.ended_with_eos);
  CHECK(gen.step_logp.size() == gold.tokens.size() + 1);  // + eos target

  Graph g;
  SpeakerTrace trace = speaker_teacher_forced(g, sp, kMeaning, gold);
  double logp_sum = 0.0;
  for (double lp : gen.step_logp) logp_sum += lp;
  CHECK(logp_sum == doctest::Approx(-g.scalar(trace.total_ce)).epsilon(1e-12));

  // Independent oracle: re-run the decoder with raw graph primitives and
  // plain softmax on the logit values.
  Graph og;
  Graph::Var h = speaker_encode_var(og, sp, kMeaning);
  size_t row = sp.bos_row();
  double oracle_logp = 0.0;
  std::vector<int> targets = gold.tokens;
  targets.push_back(sp.eos_class());
  for (int target : targets) {
    h = og.gru_cell(sp.gru, og.embed(sp.token_embedding, row), h);
    const std::vector<double> probs = softmax(og.value(og.linear(sp.out_w, sp.out_b, h)));
    oracle_logp += std::log(probs[static_cast<size_t>(target)]);
    row = static_cast<size_t>(target);
  }
  CHECK(logp_sum == doctest::Approx(oracle_logp).epsilon(1e-9));

  CHECK_THROWS_AS(speaker_generate(sp, kMeaning, DecodeMode::TeacherForced, nullptr),
                  std::invalid_argument);
}

TEST_CASE("greedy decoding is deterministic, sampling is seed-reproducible") {
  SpeakerParams sp = small_speaker(3);
  const SpeakerGeneration g1 = speaker_generate(sp, kMeaning, DecodeMode::Greedy);
  const SpeakerGeneration g2 = speaker_generate(sp, kMeaning, DecodeMode::Greedy);
  CHECK(g1.tokens == g2.tokens);
  CHECK(g1.step_logp == g2.step_logp);

  Rng r1(42), r2(42);
  const SpeakerGeneration s1 = speaker_generate(sp, kMeaning, DecodeMode::Sample, nullptr, &r1);
  const SpeakerGeneration s2 = speaker_generate(sp, kMeaning, DecodeMode::Sample, nullptr, &r2);
  CHECK(s1.tokens == s2.tokens);
  CHECK(s1.step_logp == s2.step_logp);

  CHECK_THROWS_AS(speaker_generate(sp, kMeaning, DecodeMode::Sample), std::invalid_argument);
}

TEST_CASE("generation respects max_len") {
  SpeakerParams sp = small_speaker(11);
  for (int max_len = 4; max_len <= 10; max_len += 3) {
    Rng rng(5);
    const SpeakerGeneration gen =
        speaker_generate(sp, kMeaning, DecodeMode::Sample, nullptr, &rng, max_len);
    CHECK(gen.tokens.size() <= static_cast<size_t>(max_len));
  }
}

TEST_CASE("speaker end-to-end gradient check") {
  SpeakerParams sp = small_speaker(13);
  const Utterance gold = utterance_from_text("noun-1 noun-3 verb-2", kVocab);
  const auto build = [&](Graph& g) {
    return speaker_teacher_forced(g, sp, kMeaning, gold).total_ce;
  };
  for (Tensor* t : sp.params()) t->zero_grad();
  {
    Graph g;
    g.backward(build(g));
  }
  const double err = fd_max_rel_err(
      [&]() {
        Graph g;
        return g.scalar(build(g));
      },
      sp.params());
  CHECK(err < 1e-3);
}

TEST_CASE("listener distributions normalize; zero parameters give uniform") {
  ListenerParams lp = small_listener();
  const std::vector<int> tokens = {0, 10, 1, 6};  // noun mk noun verb
  const ListenerDistributions d = listener_forward(lp, tokens, kVocab);
  const auto sum = [](const std::vector<double>& p) {
    double s = 0.0;
    for (double x : p) s += x;
    return s;
  };
  CHECK(std::fabs(sum(d.action) - 1.0) < 1e-9);
  CHECK(std::fabs(sum(d.agent) - 1.0) < 1e-9);
  CHECK(std::fabs(sum(d.patient) - 1.0) < 1e-9);
  CHECK(d.action.size() == 4);
  CHECK(d.agent.size() == 6);

  for (Tensor* t : lp.params()) std::fill(t->value.begin(), t->value.end(), 0.0);
  const ListenerDistributions u = listener_forward(lp, tokens, kVocab);
  for (double p : u.action) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  for (double p : u.agent) CHECK(p == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("listener input handling: eos cutoff, pads, errors") {
  ListenerParams lp = small_listener(9);
  const std::vector<int> base = {2, 3, 8};
  std::vector<int> padded = base;
  padded.push_back(kVocab.eos_id());
  padded.push_back(kVocab.pad_id());
  padded.push_back(kVocab.pad_id());
  CHECK(listener_forward(lp, base, kVocab).action ==
        listener_forward(lp, padded, kVocab).action);

  // Tokens after eos are ignored entirely.
  std::vector<int> garbage_after_eos = base;
  garbage_after_eos.push_back(kVocab.eos_id());
  garbage_after_eos.push_back(4);
  CHECK(listener_forward(lp, garbage_after_eos, kVocab).patient ==
        listener_forward(lp, base, kVocab).patient);

  CHECK_THROWS_AS(listener_forward(lp, std::vector<int>{}, kVocab), DataError);
  CHECK_THROWS_AS(listener_forward(lp, std::vector<int>{kVocab.eos_id(), 2}, kVocab), DataError);
  CHECK_THROWS_AS(listener_forward(lp, std::vector<int>{55}, kVocab), DataError);
}

TEST_CASE("listener_predict: argmax with lowest-id ties, invariants unchecked") {
  ListenerParams lp = small_listener();
  for (Tensor* t : lp.params()) std::fill(t->value.begin(), t->value.end(), 0.0);
  // All-uniform heads: ties resolve to the lowest ids, yielding agent ==
  // patient == 0 -- an invalid meaning returned as-is.
  const Meaning pred = listener_predict(lp, std::vector<int>{1, 2, 6}, kVocab);
  CHECK(pred == Meaning{0, 0, 0});
  CHECK_FALSE(meaning_valid(pred, 6, 4));

  const Meaning again = listener_predict(lp, std::vector<int>{1, 2, 6}, kVocab);
  CHECK(pred == again);
}

TEST_CASE("listener end-to-end gradient check") {
  ListenerParams lp = small_listener(21);
  const std::vector<int> tokens = {0, 10, 4, 7};
  const auto build = [&](Graph& g) {
    return listener_loss(g, listener_trace(g, lp, tokens), kMeaning);
  };
  for (Tensor* t : lp.params()) t->zero_grad();
  {
    Graph g;
    g.backward(build(g));
  }
  const double err = fd_max_rel_err(
      [&]() {
        Graph g;
        return g.scalar(build(g));
      },
      lp.params());
  CHECK(err < 1e-3);
}

TEST_CASE("speaker and listener share no parameters") {
  SpeakerParams sp = small_speaker();
  ListenerParams lp = small_listener();
  std::set<const Tensor*> addrs;
  for (const Tensor* t : sp.params()) addrs.insert(t);
  for (const Tensor* t : lp.params()) CHECK(addrs.count(t) == 0);
}

TEST_CASE("checkpoints round-trip and validate") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "nellcom_ckpt_test";
  fs::create_directories(dir);

  SpeakerParams sp = small_speaker(31);
  save_speaker_checkpoint(sp, kVocab, (dir / "spk").string(), 123, 0.01);
  const SpeakerParams loaded = load_speaker_checkpoint((dir / "spk").string(), kVocab);
  const auto orig = sp.params();
  const auto got = loaded.params();
  REQUIRE(orig.size() == got.size());
  for (size_t i = 0; i < orig.size(); ++i) CHECK(orig[i]->value == got[i]->value);

  ListenerParams lp = small_listener(32);
  save_listener_checkpoint(lp, kVocab, (dir / "lst").string(), 5, 0.01);
  const ListenerParams lloaded = load_listener_checkpoint((dir / "lst").string(), kVocab);
  CHECK(lp.token_embedding.value == lloaded.token_embedding.value);

  // Vocabulary hash mismatches and missing files are rejected.
  const Vocabulary other(10, 8);
  CHECK_THROWS_AS(load_speaker_checkpoint((dir / "spk").string(), other), CheckpointError);
  CHECK_THROWS_AS(load_speaker_checkpoint((dir / "absent").string(), kVocab), CheckpointError);
  CHECK_THROWS_AS(load_listener_checkpoint((dir / "spk").string(), kVocab), CheckpointError);

  fs::remove_all(dir);
}
