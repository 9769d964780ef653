#include "nellcom/metrics.hpp"

#include <cmath>

#include "nellcom/errors.hpp"

namespace nellcom {

namespace {

ProductionRecord make_record(const Meaning& m, const Utterance& raw, const GrammarSpec& g,
                             const Vocabulary& v) {
  auto [cls, truncated] = classify_utterance(m, raw, g, v);
  const int len = static_cast<int>(truncated.tokens.size());
  return {m, std::move(truncated), cls, len};
}

}  // namespace

std::vector<ProductionRecord> produce_records(const SpeakerParams& sp,
                                              const std::vector<Meaning>& meanings,
                                              const GrammarSpec& g, const Vocabulary& v,
                                              int max_len, Rng* sample_rng) {
  const DecodeMode mode = sample_rng != nullptr ? DecodeMode::Sample : DecodeMode::Greedy;
  std::vector<ProductionRecord> out;
  out.reserve(meanings.size());
  for (const Meaning& m : meanings) {
    SpeakerGeneration gen = speaker_generate(sp, m, mode, nullptr, sample_rng, max_len);
    out.push_back(make_record(m, Utterance{std::move(gen.tokens)}, g, v));
  }
  return out;
}

std::vector<ProductionRecord> records_from_pairs(
    const std::vector<std::pair<Meaning, Utterance>>& pairs, const GrammarSpec& g,
    const Vocabulary& v) {
  std::vector<ProductionRecord> out;
  out.reserve(pairs.size());
  for (const auto& [m, u] : pairs) out.push_back(make_record(m, u, g, v));
  return out;
}

std::array<size_t, 5> class_counts(const std::vector<ProductionRecord>& records) {
  std::array<size_t, 5> counts{};
  for (const ProductionRecord& r : records) counts[static_cast<size_t>(r.cls)]++;
  return counts;
}

double listening_accuracy(const ListenerParams& lp,
                          const std::vector<std::pair<Meaning, Utterance>>& pairs,
                          const Vocabulary& v) {
  if (pairs.empty()) throw DataError("listening_accuracy: empty input");
  size_t correct = 0;
  for (const auto& [m, u] : pairs) {
    if (listener_predict(lp, u.tokens, v) == m) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double speaking_accuracy_exact(const SpeakerParams& sp,
                               const std::vector<std::pair<Meaning, Utterance>>& pairs,
                               const Vocabulary& v, int max_len) {
  if (pairs.empty()) throw DataError("speaking_accuracy_exact: empty input");
  (void)v;
  size_t correct = 0;
  for (const auto& [m, gold] : pairs) {
    SpeakerGeneration gen = speaker_generate(sp, m, DecodeMode::Greedy, nullptr, nullptr, max_len);
    if (gen.ended_with_eos && gen.tokens == gold.tokens) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double permissive_speaking_accuracy(const SpeakerParams& sp,
                                    const std::vector<Meaning>& meanings, const GrammarSpec& g,
                                    const Vocabulary& v, int max_len) {
  if (meanings.empty()) throw DataError("permissive_speaking_accuracy: empty input");
  size_t correct = 0;
  for (const Meaning& m : meanings) {
    SpeakerGeneration gen = speaker_generate(sp, m, DecodeMode::Greedy, nullptr, nullptr, max_len);
    auto [cls, truncated] = classify_utterance(m, Utterance{std::move(gen.tokens)}, g, v);
    if (cls != UtteranceClass::OTHER &&
        enumerate_valid_utterances(m, g, v).count(truncated) > 0)
      ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(meanings.size());
}

double reconstruction_accuracy(const SpeakerParams& sp, const ListenerParams& lp,
                               const std::vector<Meaning>& meanings, const Vocabulary& v,
                               int max_len) {
  if (meanings.empty()) throw DataError("reconstruction_accuracy: empty input");
  (void)v;
  size_t correct = 0;
  for (const Meaning& m : meanings) {
    SpeakerGeneration gen = speaker_generate(sp, m, DecodeMode::Greedy, nullptr, nullptr, max_len);
    if (listener_predict_allow_empty(lp, gen.tokens) == m) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(meanings.size());
}

ProductionProportions production_proportions(const std::vector<ProductionRecord>& records) {
  if (records.empty()) throw DataError("production_proportions: empty input");
  const std::array<size_t, 5> c = class_counts(records);
  const double total = static_cast<double>(records.size());
  const auto n = [&](UtteranceClass cls) {
    return static_cast<double>(c[static_cast<size_t>(cls)]);
  };
  ProductionProportions p;
  p.sov = (n(UtteranceClass::SOV_mk) + n(UtteranceClass::SOV_no_mk)) / total;
  p.osv = (n(UtteranceClass::OSV_mk) + n(UtteranceClass::OSV_no_mk)) / total;
  p.with_mk = (n(UtteranceClass::SOV_mk) + n(UtteranceClass::OSV_mk)) / total;
  p.no_mk = (n(UtteranceClass::SOV_no_mk) + n(UtteranceClass::OSV_no_mk)) / total;
  p.other = n(UtteranceClass::OTHER) / total;
  return p;
}

ConditionalMarking conditional_marking(const std::vector<ProductionRecord>& records) {
  const std::array<size_t, 5> c = class_counts(records);
  const auto n = [&](UtteranceClass cls) {
    return static_cast<double>(c[static_cast<size_t>(cls)]);
  };
  ConditionalMarking out;
  const double sov_all = n(UtteranceClass::SOV_mk) + n(UtteranceClass::SOV_no_mk);
  const double osv_all = n(UtteranceClass::OSV_mk) + n(UtteranceClass::OSV_no_mk);
  if (sov_all > 0) out.sov = n(UtteranceClass::SOV_mk) / sov_all;
  if (osv_all > 0) out.osv = n(UtteranceClass::OSV_mk) / osv_all;
  return out;
}

double production_effort(const std::vector<ProductionRecord>& records) {
  if (records.empty()) throw DataError("production_effort: empty input");
  double sum = 0.0;
  for (const ProductionRecord& r : records) sum += static_cast<double>(r.length);
  return sum / static_cast<double>(records.size());
}

double uncertainty(const std::vector<ProductionRecord>& records) {
  // Joint over (surface form, grammatical-function assignment). Forms are
  // indexed 0: N N V, 1: N mk N V, 2: N N mk V; assignments 0: agent-first,
  // 1: patient-first. OTHER records carry no form and are excluded.
  double joint[3][2] = {{0, 0}, {0, 0}, {0, 0}};
  double total = 0.0;
  for (const ProductionRecord& r : records) {
    int form, gf;
    switch (r.cls) {
      case UtteranceClass::SOV_no_mk: form = 0; gf = 0; break;
      case UtteranceClass::OSV_no_mk: form = 0; gf = 1; break;
      case UtteranceClass::OSV_mk: form = 1; gf = 1; break;
      case UtteranceClass::SOV_mk: form = 2; gf = 0; break;
      default: continue;
    }
    joint[form][gf] += 1.0;
    total += 1.0;
  }
  if (total == 0.0) throw DataError("uncertainty: no classifiable records");

  double h = 0.0;
  for (int form = 0; form < 3; ++form) {
    const double p_form = (joint[form][0] + joint[form][1]) / total;
    if (p_form == 0.0) continue;
    for (int gf = 0; gf < 2; ++gf) {
      const double p_joint = joint[form][gf] / total;
      if (p_joint == 0.0) continue;  // 0 * log 0 == 0
      h -= p_joint * std::log2(p_joint / p_form);
    }
  }
  return h;
}

UncertaintyEffortPoint uncertainty_effort(const std::vector<ProductionRecord>& records) {
  return {uncertainty(records), production_effort(records)};
}

UncertaintyEffortPoint initial_tradeoff_point(const std::vector<Meaning>& meanings,
                                              const GrammarSpec& g, const Vocabulary& v) {
  Rng rng(0);  // cell assignment does not affect (H, E)
  const auto pairs = generate_exact_quota_dataset(meanings, g, v, rng);
  return uncertainty_effort(records_from_pairs(pairs, g, v));
}

}  // namespace nellcom
