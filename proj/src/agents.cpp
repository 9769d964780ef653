#include "nellcom/agents.hpp"

#include <cmath>
#include <stdexcept>

#include "nellcom/errors.hpp"

namespace nellcom {

// Embedding tables start standard-normal; linear layers (weights and
// biases) uniform within +/-1/sqrt(fan_in).
SpeakerParams::SpeakerParams(const Vocabulary& v, Rng& rng, size_t embed, size_t hidden)
    : n_entities(v.n_entities()),
      n_actions(v.n_actions()),
      embed_size(embed),
      hidden_size(hidden),
      action_embedding(Tensor::normal_init(v.n_actions(), embed, rng)),
      agent_embedding(Tensor::normal_init(v.n_entities(), embed, rng)),
      patient_embedding(Tensor::normal_init(v.n_entities(), embed, rng)),
      proj_w(Tensor::uniform_init(hidden, 3 * embed, rng)),
      proj_b(Tensor::uniform_init(hidden, 1, rng, 1.0 / std::sqrt(3.0 * embed))),
      token_embedding(Tensor::normal_init(v.content_size() + 1, embed, rng)),
      gru(embed, hidden, rng),
      out_w(Tensor::uniform_init(v.content_size() + 1, hidden, rng)),
      out_b(Tensor::uniform_init(v.content_size() + 1, 1, rng,
                                 1.0 / std::sqrt(static_cast<double>(hidden)))) {}

std::vector<Tensor*> SpeakerParams::params() {
  std::vector<Tensor*> out = {&action_embedding, &agent_embedding, &patient_embedding,
                              &proj_w,           &proj_b,          &token_embedding,
                              &out_w,            &out_b};
  for (Tensor* t : gru.params()) out.push_back(t);
  return out;
}

std::vector<const Tensor*> SpeakerParams::params() const {
  auto mutable_params = const_cast<SpeakerParams*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

ListenerParams::ListenerParams(const Vocabulary& v, Rng& rng, size_t embed, size_t hidden)
    : n_entities(v.n_entities()),
      n_actions(v.n_actions()),
      embed_size(embed),
      hidden_size(hidden),
      token_embedding(Tensor::normal_init(v.content_size(), embed, rng)),
      gru(embed, hidden, rng),
      head_action_w(Tensor::uniform_init(v.n_actions(), hidden, rng)),
      head_action_b(Tensor::uniform_init(v.n_actions(), 1, rng,
                                         1.0 / std::sqrt(static_cast<double>(hidden)))),
      head_agent_w(Tensor::uniform_init(v.n_entities(), hidden, rng)),
      head_agent_b(Tensor::uniform_init(v.n_entities(), 1, rng,
                                        1.0 / std::sqrt(static_cast<double>(hidden)))),
      head_patient_w(Tensor::uniform_init(v.n_entities(), hidden, rng)),
      head_patient_b(Tensor::uniform_init(v.n_entities(), 1, rng,
                                          1.0 / std::sqrt(static_cast<double>(hidden)))) {}

std::vector<Tensor*> ListenerParams::params() {
  std::vector<Tensor*> out = {&token_embedding, &head_action_w,  &head_action_b,
                              &head_agent_w,    &head_agent_b,   &head_patient_w,
                              &head_patient_b};
  for (Tensor* t : gru.params()) out.push_back(t);
  return out;
}

std::vector<const Tensor*> ListenerParams::params() const {
  auto mutable_params = const_cast<ListenerParams*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

Graph::Var speaker_encode_var(Graph& g, SpeakerParams& sp, const Meaning& m) {
  if (m.action < 0 || m.action >= sp.n_actions || m.agent < 0 || m.agent >= sp.n_entities ||
      m.patient < 0 || m.patient >= sp.n_entities)
    throw DataError("speaker_encode: meaning ids out of range");
  Graph::Var ea = g.embed(sp.action_embedding, static_cast<size_t>(m.action));
  Graph::Var eg = g.embed(sp.agent_embedding, static_cast<size_t>(m.agent));
  Graph::Var ep = g.embed(sp.patient_embedding, static_cast<size_t>(m.patient));
  return g.linear(sp.proj_w, sp.proj_b, g.concat3(ea, eg, ep));
}

namespace {

size_t sample_index(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return probs.size() - 1;
}

SpeakerTrace speaker_decode(Graph& g, SpeakerParams& sp, const Meaning& m, DecodeMode mode,
                            const Utterance* gold, Rng* rng, int max_len) {
  SpeakerTrace trace;
  Graph::Var h = speaker_encode_var(g, sp, m);
  size_t input_row = sp.bos_row();
  Graph::Var total{};

  // Teacher forcing targets: gold content tokens then eos.
  const size_t n_steps = mode == DecodeMode::TeacherForced
                             ? gold->tokens.size() + 1
                             : static_cast<size_t>(max_len);
  for (size_t step = 0; step < n_steps; ++step) {
    Graph::Var x = g.embed(sp.token_embedding, input_row);
    h = g.gru_cell(sp.gru, x, h);
    Graph::Var logits = g.linear(sp.out_w, sp.out_b, h);

    int target;
    if (mode == DecodeMode::TeacherForced) {
      target = step < gold->tokens.size() ? gold->tokens[step] : sp.eos_class();
    } else if (mode == DecodeMode::Greedy) {
      target = argmax_lowest(g.value(logits));
    } else {
      target = static_cast<int>(sample_index(softmax(g.value(logits)), *rng));
    }

    auto [ce, probs] = g.softmax_cross_entropy(logits, static_cast<size_t>(target));
    trace.step_logp.push_back(-g.scalar(ce));
    total = total.valid() ? g.add(total, ce) : ce;

    if (target == sp.eos_class()) {
      trace.ended_with_eos = true;
      break;
    }
    trace.tokens.push_back(target);
    input_row = static_cast<size_t>(target);
  }
  trace.total_ce = total;
  return trace;
}

Graph::Var listener_final_hidden(Graph& g, ListenerParams& lp,
                                 std::span<const int> content_tokens) {
  Graph::Var h = g.input(std::vector<double>(lp.hidden_size, 0.0));
  for (int t : content_tokens) {
    if (t < 0 || t >= static_cast<int>(lp.token_embedding.rows))
      throw DataError("listener: unknown token id " + std::to_string(t));
    Graph::Var x = g.embed(lp.token_embedding, static_cast<size_t>(t));
    h = g.gru_cell(lp.gru, x, h);
  }
  return h;
}

}  // namespace

SpeakerTrace speaker_teacher_forced(Graph& g, SpeakerParams& sp, const Meaning& m,
                                    const Utterance& gold) {
  return speaker_decode(g, sp, m, DecodeMode::TeacherForced, &gold, nullptr, 0);
}

SpeakerTrace speaker_rollout(Graph& g, SpeakerParams& sp, const Meaning& m, DecodeMode mode,
                             Rng* rng, int max_len) {
  if (mode == DecodeMode::TeacherForced)
    throw std::invalid_argument("speaker_rollout: use speaker_teacher_forced");
  if (mode == DecodeMode::Sample && rng == nullptr)
    throw std::invalid_argument("speaker_rollout: sampling needs an rng");
  return speaker_decode(g, sp, m, mode, nullptr, rng, max_len);
}

ListenerTrace listener_trace(Graph& g, ListenerParams& lp, std::span<const int> content_tokens) {
  Graph::Var h = listener_final_hidden(g, lp, content_tokens);
  return {g.linear(lp.head_action_w, lp.head_action_b, h),
          g.linear(lp.head_agent_w, lp.head_agent_b, h),
          g.linear(lp.head_patient_w, lp.head_patient_b, h)};
}

Graph::Var listener_loss(Graph& g, const ListenerTrace& t, const Meaning& m) {
  Graph::Var ce_a = g.softmax_cross_entropy(t.action_logits, static_cast<size_t>(m.action)).first;
  Graph::Var ce_g = g.softmax_cross_entropy(t.agent_logits, static_cast<size_t>(m.agent)).first;
  Graph::Var ce_p = g.softmax_cross_entropy(t.patient_logits, static_cast<size_t>(m.patient)).first;
  return g.add(g.add(ce_a, ce_g), ce_p);
}

SpeakerGeneration speaker_generate(const SpeakerParams& sp, const Meaning& m, DecodeMode mode,
                                   const Utterance* gold, Rng* rng, int max_len) {
  if (mode == DecodeMode::TeacherForced && gold == nullptr)
    throw std::invalid_argument("speaker_generate: teacher forcing needs a gold utterance");
  if (mode != DecodeMode::TeacherForced && gold != nullptr)
    throw std::invalid_argument("speaker_generate: gold utterance only valid when forcing");
  Graph g;
  // Forward-only; backward is never invoked on this graph.
  SpeakerParams& mutable_sp = const_cast<SpeakerParams&>(sp);
  SpeakerTrace t = mode == DecodeMode::TeacherForced
                       ? speaker_teacher_forced(g, mutable_sp, m, *gold)
                       : speaker_rollout(g, mutable_sp, m, mode, rng, max_len);
  return {std::move(t.tokens), t.ended_with_eos, std::move(t.step_logp)};
}

ListenerDistributions listener_forward_allow_empty(const ListenerParams& lp,
                                                   std::span<const int> content_tokens) {
  Graph g;
  ListenerParams& mutable_lp = const_cast<ListenerParams&>(lp);
  ListenerTrace t = listener_trace(g, mutable_lp, content_tokens);
  return {softmax(g.value(t.action_logits)), softmax(g.value(t.agent_logits)),
          softmax(g.value(t.patient_logits))};
}

ListenerDistributions listener_forward(const ListenerParams& lp, std::span<const int> tokens,
                                       const Vocabulary& v) {
  const std::vector<int> content = content_prefix(tokens, v);
  if (content.empty()) throw DataError("listener_forward: empty utterance");
  return listener_forward_allow_empty(lp, content);
}

Meaning listener_predict_allow_empty(const ListenerParams& lp,
                                     std::span<const int> content_tokens) {
  const ListenerDistributions d = listener_forward_allow_empty(lp, content_tokens);
  return {argmax_lowest(d.action), argmax_lowest(d.agent), argmax_lowest(d.patient)};
}

Meaning listener_predict(const ListenerParams& lp, std::span<const int> tokens,
                         const Vocabulary& v) {
  const ListenerDistributions d = listener_forward(lp, tokens, v);
  return {argmax_lowest(d.action), argmax_lowest(d.agent), argmax_lowest(d.patient)};
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  double sum = 0.0;
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

int argmax_lowest(const std::vector<double>& values) {
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return static_cast<int>(best);
}

std::vector<int> content_prefix(std::span<const int> tokens, const Vocabulary& v) {
  std::vector<int> out;
  for (int t : tokens) {
    if (t == v.eos_id() || t == v.pad_id()) break;
    if (!v.is_content(t)) throw DataError("unknown token id " + std::to_string(t));
    out.push_back(t);
  }
  return out;
}

}  // namespace nellcom
