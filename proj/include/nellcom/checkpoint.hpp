#pragma once

#include <cstdint>
#include <string>

#include "nellcom/agents.hpp"

namespace nellcom {

// Checkpoints are a JSON manifest (<prefix>.json, listing architecture,
// hyperparameters, step counter, layer shapes/offsets and the vocabulary
// hash) plus a raw little-endian float64 blob (<prefix>.bin) holding the
// parameter values layer by layer.
void save_speaker_checkpoint(const SpeakerParams& sp, const Vocabulary& v,
                             const std::string& prefix, int64_t optimizer_step,
                             double learning_rate);
void save_listener_checkpoint(const ListenerParams& lp, const Vocabulary& v,
                              const std::string& prefix, int64_t optimizer_step,
                              double learning_rate);

// Loading validates kind, shapes and the vocabulary hash; any mismatch or
// missing/truncated file raises CheckpointError.
SpeakerParams load_speaker_checkpoint(const std::string& prefix, const Vocabulary& v);
ListenerParams load_listener_checkpoint(const std::string& prefix, const Vocabulary& v);

}  // namespace nellcom
