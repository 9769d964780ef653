#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nellcom/rng.hpp"

namespace nellcom {

// An action-agent-patient triplet. Plain aggregate: listener predictions may
// legally violate agent != patient and are scored incorrect downstream, so
// validity is checked where meanings are created, not in the type.
struct Meaning {
  int action = 0;
  int agent = 0;
  int patient = 0;

  auto operator<=>(const Meaning&) const = default;
};

bool meaning_valid(const Meaning& m, int n_entities, int n_actions);

// Content-token inventory: one noun per entity, one verb per action, plus
// the case marker. eos/pad are control ids outside the content range.
class Vocabulary {
 public:
  Vocabulary(int n_entities, int n_actions);

  int n_entities() const { return n_entities_; }
  int n_actions() const { return n_actions_; }
  int content_size() const { return n_entities_ + n_actions_ + 1; }
  int noun_id(int entity) const { return entity; }
  int verb_id(int action) const { return n_entities_ + action; }
  int marker_id() const { return n_entities_ + n_actions_; }
  int eos_id() const { return content_size(); }
  int pad_id() const { return content_size() + 1; }

  bool is_content(int id) const { return id >= 0 && id < content_size(); }
  bool is_noun(int id) const { return id >= 0 && id < n_entities_; }
  bool is_verb(int id) const { return id >= n_entities_ && id < n_entities_ + n_actions_; }

  const std::string& token_name(int id) const;
  // Content tokens only; throws DataError for unknown names.
  int id_of(const std::string& name) const;

  // FNV-1a over the token inventory; stored in checkpoints so that agents
  // are never restored against a different vocabulary.
  uint64_t hash() const;

 private:
  int n_entities_;
  int n_actions_;
  std::vector<std::string> names_;  // content tokens + eos + pad
};

enum class Order { SOV, OSV };

// A miniature language: distribution over constituent orders plus an
// independent object-marking probability. Verbs are always final and
// subjects are never marked.
struct GrammarSpec {
  std::string name;
  double p_sov = 1.0;
  double p_mark = 2.0 / 3.0;

  static GrammarSpec fix_op();
  static GrammarSpec flex_op();
  // Resolves "fix+op" / "flex+op"; throws ConfigError otherwise.
  static GrammarSpec by_name(const std::string& name);
  // Reads {"name":..., "p_sov":..., "p_mark":...} from a JSON file.
  static GrammarSpec from_json_file(const std::string& path);
  // Built-in name, or a path to a grammar JSON file (anything ending in
  // ".json").
  static GrammarSpec resolve(const std::string& name_or_path);
};

struct Utterance {
  std::vector<int> tokens;  // content-token ids, eos never stored

  auto operator<=>(const Utterance&) const = default;
  size_t length() const { return tokens.size(); }
};

std::string utterance_text(const Utterance& u, const Vocabulary& v);
Utterance utterance_from_text(const std::string& text, const Vocabulary& v);

enum class UtteranceClass { SOV_no_mk, SOV_mk, OSV_no_mk, OSV_mk, OTHER };

constexpr std::array<UtteranceClass, 5> kAllUtteranceClasses = {
    UtteranceClass::SOV_no_mk, UtteranceClass::SOV_mk, UtteranceClass::OSV_no_mk,
    UtteranceClass::OSV_mk, UtteranceClass::OTHER};

const char* utterance_class_name(UtteranceClass c);

// All valid meanings in (action, agent, patient) lexicographic order.
// Rejects n_entities < 2: no agent/patient pair exists.
std::vector<Meaning> enumerate_meaning_space(int n_entities, int n_actions);

// Renders the canonical surface form for explicit order/marking choices.
Utterance render_utterance(const Meaning& m, Order order, bool marked, const Vocabulary& v);

// Samples order ~ Bernoulli(p_sov), marking ~ Bernoulli(p_mark) (independent
// draws, in that sequence) and renders.
Utterance generate_utterance(const Meaning& m, const GrammarSpec& g, const Vocabulary& v,
                             Rng& rng);

// Every utterance the grammar can assign nonzero probability for m:
// 2 candidates for fix+op, 4 for flex+op.
std::set<Utterance> enumerate_valid_utterances(const Meaning& m, const GrammarSpec& g,
                                               const Vocabulary& v);

// The four canonical forms for m regardless of grammar; classification uses
// these so that drifted productions still land in a named class.
std::array<std::pair<UtteranceClass, Utterance>, 4> canonical_forms(const Meaning& m,
                                                                    const Vocabulary& v);

// Disjoint train/test split with the coverage repair: every entity and
// every action appears at least once in the training set. Deterministic
// given the rng stream. Throws DataError when the training set is too small
// to cover the inventories.
std::pair<std::vector<Meaning>, std::vector<Meaning>> split_dataset(
    const std::vector<Meaning>& meanings, double train_fraction, int n_entities, int n_actions,
    Rng& rng);

// One freshly sampled utterance per meaning; called every epoch so agents
// cannot memorize a fixed order/marking choice per meaning.
std::vector<std::pair<Meaning, Utterance>> regenerate_epoch_dataset(
    const std::vector<Meaning>& meanings, const GrammarSpec& g, const Vocabulary& v, Rng& rng);

// Quota-based variant: joint (order, marking) cell counts hit the grammar
// probabilities exactly (largest-remainder rounding), cells assigned to
// meanings in shuffled order. Used for exact-rate baselines.
std::vector<std::pair<Meaning, Utterance>> generate_exact_quota_dataset(
    const std::vector<Meaning>& meanings, const GrammarSpec& g, const Vocabulary& v, Rng& rng);

// Truncates duplicated tails and classifies against the canonical forms.
// Truncation applies when a prefix of u equals a grammar-valid utterance for
// m and the remainder keeps repeating the prefix's trailing tokens with a
// fixed period; anything else classifies as OTHER, untruncated.
std::pair<UtteranceClass, Utterance> classify_utterance(const Meaning& m, const Utterance& u,
                                                        const GrammarSpec& g,
                                                        const Vocabulary& v);

// Dataset file round-trip: "action agent patient\ttoken token ..." per line.
std::string dataset_line(const Meaning& m, const Utterance& u, const Vocabulary& v);
std::pair<Meaning, Utterance> parse_dataset_line(const std::string& line, const Vocabulary& v);

}  // namespace nellcom
