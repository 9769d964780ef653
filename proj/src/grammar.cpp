#include "nellcom/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nellcom/errors.hpp"

namespace nellcom {

bool meaning_valid(const Meaning& m, int n_entities, int n_actions) {
  return m.action >= 0 && m.action < n_actions && m.agent >= 0 && m.agent < n_entities &&
         m.patient >= 0 && m.patient < n_entities && m.agent != m.patient;
}

Vocabulary::Vocabulary(int n_entities, int n_actions)
    : n_entities_(n_entities), n_actions_(n_actions) {
  if (n_entities < 1 || n_actions < 1)
    throw ConfigError("vocabulary requires at least one entity and one action");
  names_.reserve(content_size() + 2);
  for (int e = 0; e < n_entities; ++e) names_.push_back("noun-" + std::to_string(e + 1));
  for (int a = 0; a < n_actions; ++a) names_.push_back("verb-" + std::to_string(a + 1));
  names_.push_back("mk");
  names_.push_back("<eos>");
  names_.push_back("<pad>");
}

const std::string& Vocabulary::token_name(int id) const {
  if (id < 0 || id >= static_cast<int>(names_.size()))
    throw DataError("unknown token id " + std::to_string(id));
  return names_[id];
}

int Vocabulary::id_of(const std::string& name) const {
  for (int i = 0; i < content_size(); ++i)
    if (names_[i] == name) return i;
  throw DataError("unknown token '" + name + "'");
}

uint64_t Vocabulary::hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string& s : names_) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  return h;
}

GrammarSpec GrammarSpec::fix_op() { return {"fix+op", 1.0, 2.0 / 3.0}; }
GrammarSpec GrammarSpec::flex_op() { return {"flex+op", 0.5, 2.0 / 3.0}; }

GrammarSpec GrammarSpec::by_name(const std::string& name) {
  if (name == "fix+op") return fix_op();
  if (name == "flex+op") return flex_op();
  throw ConfigError("unknown grammar '" + name + "'");
}

GrammarSpec GrammarSpec::resolve(const std::string& name_or_path) {
  if (name_or_path.size() > 5 &&
      name_or_path.compare(name_or_path.size() - 5, 5, ".json") == 0)
    return from_json_file(name_or_path);
  return by_name(name_or_path);
}

GrammarSpec GrammarSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read grammar file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid grammar JSON in '" + path + "': " + e.what());
  }
  GrammarSpec g;
  try {
    g.name = j.at("name").get<std::string>();
    g.p_sov = j.at("p_sov").get<double>();
    g.p_mark = j.at("p_mark").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("grammar JSON missing keys in '" + path + "': " + e.what());
  }
  if (g.p_sov < 0.0 || g.p_sov > 1.0 || g.p_mark < 0.0 || g.p_mark > 1.0)
    throw ConfigError("grammar probabilities must lie in [0,1]");
  return g;
}

std::string utterance_text(const Utterance& u, const Vocabulary& v) {
  std::string out;
  for (size_t i = 0; i < u.tokens.size(); ++i) {
    if (i) out += ' ';
    out += v.token_name(u.tokens[i]);
  }
  return out;
}

Utterance utterance_from_text(const std::string& text, const Vocabulary& v) {
  Utterance u;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) u.tokens.push_back(v.id_of(tok));
  return u;
}

const char* utterance_class_name(UtteranceClass c) {
  switch (c) {
    case UtteranceClass::SOV_no_mk: return "sov_no_mk";
    case UtteranceClass::SOV_mk: return "sov_mk";
    case UtteranceClass::OSV_no_mk: return "osv_no_mk";
    case UtteranceClass::OSV_mk: return "osv_mk";
    case UtteranceClass::OTHER: return "other";
  }
  return "other";
}

std::vector<Meaning> enumerate_meaning_space(int n_entities, int n_actions) {
  if (n_entities < 2) throw DataError("meaning space needs at least 2 entities");
  if (n_actions < 1) throw DataError("meaning space needs at least 1 action");
  std::vector<Meaning> out;
  out.reserve(static_cast<size_t>(n_actions) * n_entities * (n_entities - 1));
  for (int action = 0; action < n_actions; ++action)
    for (int agent = 0; agent < n_entities; ++agent)
      for (int patient = 0; patient < n_entities; ++patient)
        if (agent != patient) out.push_back({action, agent, patient});
  return out;
}

Utterance render_utterance(const Meaning& m, Order order, bool marked, const Vocabulary& v) {
  Utterance u;
  u.tokens.reserve(4);
  if (order == Order::SOV) {
    u.tokens.push_back(v.noun_id(m.agent));
    u.tokens.push_back(v.noun_id(m.patient));
    if (marked) u.tokens.push_back(v.marker_id());
  } else {
    u.tokens.push_back(v.noun_id(m.patient));
    if (marked) u.tokens.push_back(v.marker_id());
    u.tokens.push_back(v.noun_id(m.agent));
  }
  u.tokens.push_back(v.verb_id(m.action));
  return u;
}

Utterance generate_utterance(const Meaning& m, const GrammarSpec& g, const Vocabulary& v,
                             Rng& rng) {
  const Order order = rng.bernoulli(g.p_sov) ? Order::SOV : Order::OSV;
  const bool marked = rng.bernoulli(g.p_mark);
  return render_utterance(m, order, marked, v);
}

std::set<Utterance> enumerate_valid_utterances(const Meaning& m, const GrammarSpec& g,
                                               const Vocabulary& v) {
  std::set<Utterance> out;
  for (Order order : {Order::SOV, Order::OSV}) {
    const double p_order = order == Order::SOV ? g.p_sov : 1.0 - g.p_sov;
    if (p_order <= 0.0) continue;
    for (bool marked : {false, true}) {
      const double p_marked = marked ? g.p_mark : 1.0 - g.p_mark;
      if (p_marked <= 0.0) continue;
      out.insert(render_utterance(m, order, marked, v));
    }
  }
  return out;
}

std::array<std::pair<UtteranceClass, Utterance>, 4> canonical_forms(const Meaning& m,
                                                                    const Vocabulary& v) {
  return {{{UtteranceClass::SOV_no_mk, render_utterance(m, Order::SOV, false, v)},
           {UtteranceClass::SOV_mk, render_utterance(m, Order::SOV, true, v)},
           {UtteranceClass::OSV_no_mk, render_utterance(m, Order::OSV, false, v)},
           {UtteranceClass::OSV_mk, render_utterance(m, Order::OSV, true, v)}}};
}

namespace {

bool covers_inventories(const std::vector<Meaning>& train, int n_entities, int n_actions,
                        std::vector<int>* missing_entity = nullptr,
                        std::vector<int>* missing_action = nullptr) {
  std::vector<int> ent(n_entities, 0), act(n_actions, 0);
  for (const Meaning& m : train) {
    ent[m.agent]++;
    ent[m.patient]++;
    act[m.action]++;
  }
  bool ok = true;
  for (int e = 0; e < n_entities; ++e)
    if (ent[e] == 0) {
      ok = false;
      if (missing_entity) missing_entity->push_back(e);
    }
  for (int a = 0; a < n_actions; ++a)
    if (act[a] == 0) {
      ok = false;
      if (missing_action) missing_action->push_back(a);
    }
  return ok;
}

}  // namespace

std::pair<std::vector<Meaning>, std::vector<Meaning>> split_dataset(
    const std::vector<Meaning>& meanings, double train_fraction, int n_entities, int n_actions,
    Rng& rng) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  std::vector<Meaning> pool = meanings;
  rng.shuffle(pool);
  const size_t n_train =
      static_cast<size_t>(std::llround(train_fraction * static_cast<double>(pool.size())));
  if (n_train == 0 || n_train >= pool.size())
    throw DataError("split produces an empty train or test set");
  if (n_train < static_cast<size_t>(std::max(n_entities, n_actions)))
    throw DataError("training set too small to cover all entities and actions");

  std::vector<Meaning> train(pool.begin(), pool.begin() + n_train);
  std::vector<Meaning> test(pool.begin() + n_train, pool.end());

  // Coverage repair: swap test items containing unseen entities/actions with
  // random train items whose atoms all stay covered after removal.
  for (int iter = 0; iter < 10000; ++iter) {
    std::vector<int> missing_entity, missing_action;
    if (covers_inventories(train, n_entities, n_actions, &missing_entity, &missing_action))
      return {std::move(train), std::move(test)};

    const auto mentions_missing = [&](const Meaning& m) {
      for (int e : missing_entity)
        if (m.agent == e || m.patient == e) return true;
      for (int a : missing_action)
        if (m.action == a) return true;
      return false;
    };
    std::vector<size_t> candidates;
    for (size_t i = 0; i < test.size(); ++i)
      if (mentions_missing(test[i])) candidates.push_back(i);
    if (candidates.empty())
      throw DataError("coverage repair failed: missing items absent from test set");
    const size_t test_idx = candidates[rng.below(candidates.size())];

    std::vector<int> ent(n_entities, 0), act(n_actions, 0);
    for (const Meaning& m : train) {
      ent[m.agent]++;
      ent[m.patient]++;
      act[m.action]++;
    }
    std::vector<size_t> evictable;
    for (size_t i = 0; i < train.size(); ++i) {
      const Meaning& m = train[i];
      if (ent[m.agent] >= 2 && ent[m.patient] >= 2 && act[m.action] >= 2)
        evictable.push_back(i);
    }
    if (evictable.empty())
      throw DataError("training set too small to cover all entities and actions");
    const size_t train_idx = evictable[rng.below(evictable.size())];
    std::swap(train[train_idx], test[test_idx]);
  }
  throw DataError("coverage repair did not converge");
}

std::vector<std::pair<Meaning, Utterance>> regenerate_epoch_dataset(
    const std::vector<Meaning>& meanings, const GrammarSpec& g, const Vocabulary& v, Rng& rng) {
  std::vector<std::pair<Meaning, Utterance>> out;
  out.reserve(meanings.size());
  for (const Meaning& m : meanings) out.emplace_back(m, generate_utterance(m, g, v, rng));
  return out;
}

std::vector<std::pair<Meaning, Utterance>> generate_exact_quota_dataset(
    const std::vector<Meaning>& meanings, const GrammarSpec& g, const Vocabulary& v, Rng& rng) {
  const size_t n = meanings.size();
  const std::array<std::pair<Order, bool>, 4> cells = {
      {{Order::SOV, false}, {Order::SOV, true}, {Order::OSV, false}, {Order::OSV, true}}};
  std::array<double, 4> probs{};
  for (size_t c = 0; c < 4; ++c) {
    const double po = cells[c].first == Order::SOV ? g.p_sov : 1.0 - g.p_sov;
    const double pm = cells[c].second ? g.p_mark : 1.0 - g.p_mark;
    probs[c] = po * pm;
  }
  // Largest-remainder rounding of cell quotas.
  std::array<size_t, 4> quota{};
  std::array<double, 4> remainder{};
  size_t assigned = 0;
  for (size_t c = 0; c < 4; ++c) {
    const double exact = probs[c] * static_cast<double>(n);
    quota[c] = static_cast<size_t>(std::floor(exact + 1e-9));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  while (assigned < n) {
    size_t best = 0;
    for (size_t c = 1; c < 4; ++c)
      if (remainder[c] > remainder[best]) best = c;
    quota[best]++;
    remainder[best] = -1.0;
    assigned++;
  }

  std::vector<size_t> cell_of;
  cell_of.reserve(n);
  for (size_t c = 0; c < 4; ++c) cell_of.insert(cell_of.end(), quota[c], c);
  rng.shuffle(cell_of);

  std::vector<std::pair<Meaning, Utterance>> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const auto [order, marked] = cells[cell_of[i]];
    out.emplace_back(meanings[i], render_utterance(meanings[i], order, marked, v));
  }
  return out;
}

std::pair<UtteranceClass, Utterance> classify_utterance(const Meaning& m, const Utterance& u,
                                                        const GrammarSpec& g,
                                                        const Vocabulary& v) {
  for (int t : u.tokens)
    if (!v.is_content(t)) throw DataError("classify_utterance: non-content token in utterance");

  // Truncation: a grammar-valid prefix whose remainder keeps repeating the
  // prefix tail with some fixed period k (u[i] == u[i-k] for all i past the
  // prefix). Valid candidates are never prefixes of one another, so at most
  // one prefix can match.
  const auto tail_repeats_prefix = [](const std::vector<int>& t, size_t p) {
    for (size_t k = 1; k <= p; ++k) {
      bool periodic = true;
      for (size_t i = p; i < t.size(); ++i) {
        if (t[i] != t[i - k]) {
          periodic = false;
          break;
        }
      }
      if (periodic) return true;
    }
    return false;
  };

  Utterance truncated = u;
  for (const Utterance& cand : enumerate_valid_utterances(m, g, v)) {
    const size_t p = cand.tokens.size();
    if (u.tokens.size() < p) continue;
    if (!std::equal(cand.tokens.begin(), cand.tokens.end(), u.tokens.begin())) continue;
    // Prefix matched; candidates are mutually prefix-free, so decide here.
    if (u.tokens.size() == p || tail_repeats_prefix(u.tokens, p)) truncated = cand;
    break;
  }

  for (const auto& [cls, form] : canonical_forms(m, v)) {
    if (truncated == form) return {cls, truncated};
  }
  return {UtteranceClass::OTHER, u};
}

std::string dataset_line(const Meaning& m, const Utterance& u, const Vocabulary& v) {
  std::string out = std::to_string(m.action) + ' ' + std::to_string(m.agent) + ' ' +
                    std::to_string(m.patient) + '\t' + utterance_text(u, v);
  return out;
}

std::pair<Meaning, Utterance> parse_dataset_line(const std::string& line, const Vocabulary& v) {
  const size_t tab = line.find('\t');
  if (tab == std::string::npos) throw DataError("dataset line missing tab separator");
  std::istringstream head(line.substr(0, tab));
  Meaning m;
  if (!(head >> m.action >> m.agent >> m.patient))
    throw DataError("dataset line has malformed meaning triple");
  if (!meaning_valid(m, v.n_entities(), v.n_actions()))
    throw DataError("dataset line meaning out of range");
  return {m, utterance_from_text(line.substr(tab + 1), v)};
}

}  // namespace nellcom
