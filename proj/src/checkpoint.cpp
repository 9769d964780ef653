#include "nellcom/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nellcom/errors.hpp"

namespace nellcom {

namespace {

using NamedTensors = std::vector<std::pair<std::string, const Tensor*>>;
using MutableNamedTensors = std::vector<std::pair<std::string, Tensor*>>;

MutableNamedTensors speaker_layers(SpeakerParams& sp) {
  return {{"action_embedding", &sp.action_embedding},
          {"agent_embedding", &sp.agent_embedding},
          {"patient_embedding", &sp.patient_embedding},
          {"proj_w", &sp.proj_w},
          {"proj_b", &sp.proj_b},
          {"token_embedding", &sp.token_embedding},
          {"gru_w_z", &sp.gru.w_z}, {"gru_u_z", &sp.gru.u_z}, {"gru_b_z", &sp.gru.b_z},
          {"gru_w_r", &sp.gru.w_r}, {"gru_u_r", &sp.gru.u_r}, {"gru_b_r", &sp.gru.b_r},
          {"gru_w_n", &sp.gru.w_n}, {"gru_u_n", &sp.gru.u_n}, {"gru_b_n", &sp.gru.b_n},
          {"out_w", &sp.out_w},
          {"out_b", &sp.out_b}};
}

MutableNamedTensors listener_layers(ListenerParams& lp) {
  return {{"token_embedding", &lp.token_embedding},
          {"gru_w_z", &lp.gru.w_z}, {"gru_u_z", &lp.gru.u_z}, {"gru_b_z", &lp.gru.b_z},
          {"gru_w_r", &lp.gru.w_r}, {"gru_u_r", &lp.gru.u_r}, {"gru_b_r", &lp.gru.b_r},
          {"gru_w_n", &lp.gru.w_n}, {"gru_u_n", &lp.gru.u_n}, {"gru_b_n", &lp.gru.b_n},
          {"head_action_w", &lp.head_action_w}, {"head_action_b", &lp.head_action_b},
          {"head_agent_w", &lp.head_agent_w}, {"head_agent_b", &lp.head_agent_b},
          {"head_patient_w", &lp.head_patient_w}, {"head_patient_b", &lp.head_patient_b}};
}

void write_le_doubles(std::ofstream& out, const std::vector<double>& values) {
  for (double d : values) {
    uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
  }
}

std::vector<double> read_le_doubles(std::ifstream& in, size_t count) {
  std::vector<double> out(count);
  std::vector<unsigned char> buf(count * 8);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<size_t>(in.gcount()) != buf.size())
    throw CheckpointError("checkpoint blob truncated");
  for (size_t k = 0; k < count; ++k) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(buf[k * 8 + i]) << (8 * i);
    std::memcpy(&out[k], &bits, sizeof(double));
  }
  return out;
}

std::string hash_hex(uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_checkpoint(const std::string& kind, const MutableNamedTensors& layers,
                     const nlohmann::json& arch, const Vocabulary& v, const std::string& prefix,
                     int64_t optimizer_step, double learning_rate) {
  nlohmann::json manifest;
  manifest["format"] = "nellcom-checkpoint-v1";
  manifest["kind"] = kind;
  manifest["architecture"] = arch;
  manifest["vocabulary_hash"] = hash_hex(v.hash());
  manifest["optimizer_step"] = optimizer_step;
  manifest["learning_rate"] = learning_rate;

  nlohmann::json layer_list = nlohmann::json::array();
  size_t offset = 0;
  for (const auto& [name, t] : layers) {
    layer_list.push_back({{"name", name},
                          {"shape", {t->rows, t->cols}},
                          {"offset_doubles", offset},
                          {"count", t->size()}});
    offset += t->size();
  }
  manifest["layers"] = layer_list;

  std::ofstream jf(prefix + ".json");
  if (!jf) throw CheckpointError("cannot write checkpoint manifest '" + prefix + ".json'");
  jf << manifest.dump(2) << '\n';

  std::ofstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw CheckpointError("cannot write checkpoint blob '" + prefix + ".bin'");
  for (const auto& entry : layers) write_le_doubles(bf, entry.second->value);
}

nlohmann::json load_manifest(const std::string& prefix, const std::string& expected_kind,
                             const Vocabulary& v) {
  std::ifstream jf(prefix + ".json");
  if (!jf) throw CheckpointError("missing checkpoint manifest '" + prefix + ".json'");
  nlohmann::json manifest;
  try {
    jf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("invalid checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "nellcom-checkpoint-v1")
    throw CheckpointError("unsupported checkpoint format in '" + prefix + ".json'");
  if (manifest.value("kind", "") != expected_kind)
    throw CheckpointError("checkpoint kind mismatch: expected " + expected_kind);
  if (manifest.value("vocabulary_hash", "") != hash_hex(v.hash()))
    throw CheckpointError("checkpoint vocabulary hash mismatch");
  return manifest;
}

void load_layers(const nlohmann::json& manifest, const std::string& prefix,
                 const MutableNamedTensors& layers) {
  std::ifstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw CheckpointError("missing checkpoint blob '" + prefix + ".bin'");
  const auto& layer_list = manifest.at("layers");
  if (layer_list.size() != layers.size())
    throw CheckpointError("checkpoint layer count mismatch");
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& entry = layer_list[i];
    Tensor* t = layers[i].second;
    if (entry.at("name").get<std::string>() != layers[i].first)
      throw CheckpointError("checkpoint layer name mismatch at index " + std::to_string(i));
    const auto shape = entry.at("shape");
    if (shape[0].get<size_t>() != t->rows || shape[1].get<size_t>() != t->cols)
      throw CheckpointError("checkpoint shape mismatch for layer " + layers[i].first);
    t->value = read_le_doubles(bf, t->size());
    t->zero_grad();
  }
}

}  // namespace

void save_speaker_checkpoint(const SpeakerParams& sp, const Vocabulary& v,
                             const std::string& prefix, int64_t optimizer_step,
                             double learning_rate) {
  nlohmann::json arch = {{"n_entities", sp.n_entities},
                         {"n_actions", sp.n_actions},
                         {"embed_size", sp.embed_size},
                         {"hidden_size", sp.hidden_size}};
  save_checkpoint("speaker", speaker_layers(const_cast<SpeakerParams&>(sp)), arch, v, prefix,
                  optimizer_step, learning_rate);
}

void save_listener_checkpoint(const ListenerParams& lp, const Vocabulary& v,
                              const std::string& prefix, int64_t optimizer_step,
                              double learning_rate) {
  nlohmann::json arch = {{"n_entities", lp.n_entities},
                         {"n_actions", lp.n_actions},
                         {"embed_size", lp.embed_size},
                         {"hidden_size", lp.hidden_size}};
  save_checkpoint("listener", listener_layers(const_cast<ListenerParams&>(lp)), arch, v, prefix,
                  optimizer_step, learning_rate);
}

SpeakerParams load_speaker_checkpoint(const std::string& prefix, const Vocabulary& v) {
  nlohmann::json manifest = load_manifest(prefix, "speaker", v);
  const auto& arch = manifest.at("architecture");
  Rng scratch(0);
  SpeakerParams sp(v, scratch, arch.at("embed_size").get<size_t>(),
                   arch.at("hidden_size").get<size_t>());
  load_layers(manifest, prefix, speaker_layers(sp));
  return sp;
}

ListenerParams load_listener_checkpoint(const std::string& prefix, const Vocabulary& v) {
  nlohmann::json manifest = load_manifest(prefix, "listener", v);
  const auto& arch = manifest.at("architecture");
  Rng scratch(0);
  ListenerParams lp(v, scratch, arch.at("embed_size").get<size_t>(),
                    arch.at("hidden_size").get<size_t>());
  load_layers(manifest, prefix, listener_layers(lp));
  return lp;
}

}  // namespace nellcom
