#pragma once

#include <array>
#include <optional>
#include <vector>

#include "nellcom/agents.hpp"
#include "nellcom/grammar.hpp"

namespace nellcom {

// One analyzed production: the greedy utterance after truncation, its class
// and content-word length.
struct ProductionRecord {
  Meaning meaning;
  Utterance truncated;
  UtteranceClass cls = UtteranceClass::OTHER;
  int length = 0;
};

struct UncertaintyEffortPoint {
  double h_bits = 0.0;
  double effort = 0.0;
};

struct ProductionProportions {
  double sov = 0.0;
  double osv = 0.0;
  double with_mk = 0.0;
  double no_mk = 0.0;
  double other = 0.0;
};

struct ConditionalMarking {
  std::optional<double> sov;  // SOV_mk / all SOV; empty when no SOV produced
  std::optional<double> osv;
};

// Speaker productions over the given meanings, classified/truncated.
// Production preferences are read out by sampling the speaker's
// distribution (pass an rng); greedy decoding reads out its mode instead
// and is what the accuracy metrics use.
std::vector<ProductionRecord> produce_records(const SpeakerParams& sp,
                                              const std::vector<Meaning>& meanings,
                                              const GrammarSpec& g, const Vocabulary& v,
                                              int max_len = 10, Rng* sample_rng = nullptr);

// Records derived from already-realized utterances (e.g. the initial
// language itself rather than an agent's output).
std::vector<ProductionRecord> records_from_pairs(
    const std::vector<std::pair<Meaning, Utterance>>& pairs, const GrammarSpec& g,
    const Vocabulary& v);

std::array<size_t, 5> class_counts(const std::vector<ProductionRecord>& records);

// Fraction of pairs whose full predicted triple matches (all-or-nothing).
double listening_accuracy(const ListenerParams& lp,
                          const std::vector<std::pair<Meaning, Utterance>>& pairs,
                          const Vocabulary& v);

// Exact: greedy output identical to the paired gold utterance.
double speaking_accuracy_exact(const SpeakerParams& sp,
                               const std::vector<std::pair<Meaning, Utterance>>& pairs,
                               const Vocabulary& v, int max_len = 10);

// Permissive: greedy output, after truncation, is any grammar-valid
// utterance for the meaning.
double permissive_speaking_accuracy(const SpeakerParams& sp,
                                    const std::vector<Meaning>& meanings, const GrammarSpec& g,
                                    const Vocabulary& v, int max_len = 10);

// Greedy speaker into greedy listener, all-or-nothing triple match.
double reconstruction_accuracy(const SpeakerParams& sp, const ListenerParams& lp,
                               const std::vector<Meaning>& meanings, const Vocabulary& v,
                               int max_len = 10);

// The Total denominator includes OTHER records.
ProductionProportions production_proportions(const std::vector<ProductionRecord>& records);

ConditionalMarking conditional_marking(const std::vector<ProductionRecord>& records);

// Mean content words per utterance after truncation (OTHER included).
double production_effort(const std::vector<ProductionRecord>& records);

// Conditional entropy (bits) of grammatical-function assignment given
// surface form, estimated from the empirical joint over non-OTHER records.
// Forms: {N N V, N mk N V, N N mk V}; assignment is the role of the first
// noun. Throws DataError when no classifiable records remain.
double uncertainty(const std::vector<ProductionRecord>& records);

UncertaintyEffortPoint uncertainty_effort(const std::vector<ProductionRecord>& records);

// The grammar's own (H, E) reference point, computed from an exact-rate
// realization over the given meanings.
UncertaintyEffortPoint initial_tradeoff_point(const std::vector<Meaning>& meanings,
                                              const GrammarSpec& g, const Vocabulary& v);

}  // namespace nellcom
