#pragma once

#include <span>
#include <vector>

#include "nellcom/grammar.hpp"
#include "nellcom/graph.hpp"

namespace nellcom {

// Speaker: the three meaning-attribute embeddings are concatenated and
// projected to the decoder's initial hidden state; a GRU then emits tokens
// through a softmax over content tokens plus eos. The decoder input table
// covers content tokens plus a dedicated bos row; eos is never an input.
struct SpeakerParams {
  int n_entities = 0;
  int n_actions = 0;
  size_t embed_size = 8;
  size_t hidden_size = 128;

  Tensor action_embedding;   // n_actions x embed
  Tensor agent_embedding;    // n_entities x embed
  Tensor patient_embedding;  // n_entities x embed
  Tensor proj_w, proj_b;     // hidden x 3*embed, hidden
  Tensor token_embedding;    // (content+1) x embed, last row = bos
  GruParams gru;             // embed -> hidden
  Tensor out_w, out_b;       // (content+1) x hidden, last class = eos

  SpeakerParams() = default;
  SpeakerParams(const Vocabulary& v, Rng& rng, size_t embed = 8, size_t hidden = 128);

  int vocab_content_size() const { return n_entities + n_actions + 1; }
  int eos_class() const { return vocab_content_size(); }
  size_t bos_row() const { return static_cast<size_t>(vocab_content_size()); }

  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
};

// Listener: GRU over content-token embeddings; the final hidden state feeds
// three parallel linear heads (action, agent, patient) with no intermediate
// non-linearity.
struct ListenerParams {
  int n_entities = 0;
  int n_actions = 0;
  size_t embed_size = 32;
  size_t hidden_size = 32;

  Tensor token_embedding;  // content x embed
  GruParams gru;           // embed -> hidden
  Tensor head_action_w, head_action_b;
  Tensor head_agent_w, head_agent_b;
  Tensor head_patient_w, head_patient_b;

  ListenerParams() = default;
  ListenerParams(const Vocabulary& v, Rng& rng, size_t embed = 32, size_t hidden = 32);

  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
};

enum class DecodeMode { TeacherForced, Greedy, Sample };

// Graph-level speaker pass. `total_ce` is the summed per-step cross-entropy
// (the supervised loss for teacher forcing; for rollouts, -sum of sampled
// log-probabilities), living in the supplied graph.
struct SpeakerTrace {
  std::vector<int> tokens;        // emitted/forced content tokens, eos excluded
  bool ended_with_eos = false;
  std::vector<double> step_logp;  // per step, includes the eos step when taken
  Graph::Var total_ce;
};

Graph::Var speaker_encode_var(Graph& g, SpeakerParams& sp, const Meaning& m);

SpeakerTrace speaker_teacher_forced(Graph& g, SpeakerParams& sp, const Meaning& m,
                                    const Utterance& gold);
SpeakerTrace speaker_rollout(Graph& g, SpeakerParams& sp, const Meaning& m, DecodeMode mode,
                             Rng* rng, int max_len);

// Graph-level listener pass over content tokens (may be empty: the heads
// then see the all-zero initial hidden state).
struct ListenerTrace {
  Graph::Var action_logits, agent_logits, patient_logits;
};
ListenerTrace listener_trace(Graph& g, ListenerParams& lp, std::span<const int> content_tokens);

// Summed three-head cross-entropy against m; equals -(listener reward).
Graph::Var listener_loss(Graph& g, const ListenerTrace& t, const Meaning& m);

// ---- Forward-only wrappers -------------------------------------------------

struct SpeakerGeneration {
  std::vector<int> tokens;
  bool ended_with_eos = false;
  std::vector<double> step_logp;
};

// Gold required iff mode == TeacherForced; rng required iff mode == Sample.
SpeakerGeneration speaker_generate(const SpeakerParams& sp, const Meaning& m, DecodeMode mode,
                                   const Utterance* gold = nullptr, Rng* rng = nullptr,
                                   int max_len = 10);

struct ListenerDistributions {
  std::vector<double> action, agent, patient;
};

// Consumes tokens up to (excluding) the first eos/pad; rejects empty input
// and unknown tokens.
ListenerDistributions listener_forward(const ListenerParams& lp, std::span<const int> tokens,
                                       const Vocabulary& v);
Meaning listener_predict(const ListenerParams& lp, std::span<const int> tokens,
                         const Vocabulary& v);

// RL-internal variant: an empty sampled utterance is legal and leaves the
// listener with its zero initial hidden state.
ListenerDistributions listener_forward_allow_empty(const ListenerParams& lp,
                                                   std::span<const int> content_tokens);
Meaning listener_predict_allow_empty(const ListenerParams& lp,
                                     std::span<const int> content_tokens);

std::vector<double> softmax(const std::vector<double>& logits);
int argmax_lowest(const std::vector<double>& values);

// Strips control tokens: keeps the content prefix before the first eos/pad.
std::vector<int> content_prefix(std::span<const int> tokens, const Vocabulary& v);

}  // namespace nellcom
