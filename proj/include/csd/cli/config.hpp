#pragma once

// Run configuration: one JSON file drives every pipeline stage. Every field
// has a default; the effective configuration is echoed (with its hash) into
// checkpoints, reports and sidecars.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csd/acoustic/model.hpp"
#include "csd/acoustic/predictor.hpp"
#include "csd/common.hpp"
#include "csd/corpus/mel.hpp"
#include "csd/corpus/synthetic.hpp"
#include "csd/corpus/types.hpp"
#include "csd/eval/pitch.hpp"
#include "csd/plcsd/config.hpp"
#include "csd/synth/vocoder.hpp"

namespace csd {

struct InventoryConfig {
  std::string kind = "arpabet";  // arpabet | synthetic | explicit
  int n_phones = 5;              // synthetic
  std::vector<std::string> phones;  // explicit

  PhoneInventory build() const {
    if (kind == "arpabet") return PhoneInventory::arpabet();
    if (kind == "synthetic") return PhoneInventory::synthetic(n_phones);
    if (kind == "explicit") return PhoneInventory(phones);
    throw validation_error("inventory.kind must be arpabet|synthetic|explicit");
  }
};

struct CorpusConfig {
  std::string manifest;
  double train_fraction = 0.9;
  std::uint64_t split_seed = 17;
};

struct SyntheticRunConfig {
  SyntheticConfig generator;
  long n_utterances = 200;
  long phones_per_utterance = 6;
  long frames_per_segment = 8;
  bool style_per_utterance = true;
  std::uint64_t seed = 0;
};

struct RunConfig {
  std::uint64_t seed = 1234;
  bool deterministic = true;
  std::string output_dir = "runs/default";
  InventoryConfig inventory;
  SilenceLabels silence;
  CorpusConfig corpus;
  MelConfig mel;
  PlcsdConfig plcsd;
  AcousticConfig acoustic;
  PredictorConfig predictor;
  VocoderConfig vocoder;
  PitchConfig pitch;
  SyntheticRunConfig synthetic;
};

namespace cfgjson {

inline void get(const nlohmann::json& j, const char* k, double& v) {
  if (j.contains(k)) v = j.at(k).get<double>();
}
inline void get(const nlohmann::json& j, const char* k, long& v) {
  if (j.contains(k)) v = j.at(k).get<long>();
}
inline void get(const nlohmann::json& j, const char* k, int& v) {
  if (j.contains(k)) v = j.at(k).get<int>();
}
inline void get(const nlohmann::json& j, const char* k, bool& v) {
  if (j.contains(k)) v = j.at(k).get<bool>();
}
inline void get(const nlohmann::json& j, const char* k, std::uint64_t& v) {
  if (j.contains(k)) v = j.at(k).get<std::uint64_t>();
}
inline void get(const nlohmann::json& j, const char* k, std::string& v) {
  if (j.contains(k)) v = j.at(k).get<std::string>();
}
inline void get(const nlohmann::json& j, const char* k,
                std::vector<std::string>& v) {
  if (j.contains(k)) v = j.at(k).get<std::vector<std::string>>();
}

}  // namespace cfgjson

inline void from_json_into(const nlohmann::json& j, MelConfig& c) {
  using cfgjson::get;
  get(j, "sample_rate", c.sample_rate);
  get(j, "frame_length", c.frame_length);
  get(j, "hop_length", c.hop_length);
  get(j, "n_mels", c.n_mels);
  get(j, "f_min", c.f_min);
  get(j, "f_max", c.f_max);
  get(j, "log_floor", c.log_floor);
}

inline nlohmann::json to_json(const MelConfig& c) {
  return {{"sample_rate", c.sample_rate}, {"frame_length", c.frame_length},
          {"hop_length", c.hop_length},   {"n_mels", c.n_mels},
          {"f_min", c.f_min},             {"f_max", c.f_max},
          {"log_floor", c.log_floor}};
}

inline void from_json_into(const nlohmann::json& j, PlcsdConfig& c) {
  using cfgjson::get;
  get(j, "d_c", c.d_c);
  get(j, "d_s", c.d_s);
  get(j, "encoder_width", c.encoder_width);
  get(j, "decoder_width", c.decoder_width);
  get(j, "classifier_hidden", c.classifier_hidden);
  get(j, "discriminator_width", c.discriminator_width);
  get(j, "lr_auto", c.lr_auto);
  get(j, "lr_collab", c.lr_collab);
  get(j, "lr_style_dis", c.lr_style_dis);
  get(j, "lr_style_gen", c.lr_style_gen);
  get(j, "lr_seg_dis", c.lr_seg_dis);
  get(j, "lr_seg_gen", c.lr_seg_gen);
  get(j, "batch_size", c.batch_size);
  get(j, "max_epochs", c.max_epochs);
  get(j, "gate_threshold", c.gate_threshold);
  get(j, "max_decode_frames", c.max_decode_frames);
  get(j, "early_stop_patience", c.early_stop_patience);
  get(j, "early_stop_min_rel", c.early_stop_min_rel);
  get(j, "val_fraction", c.val_fraction);
  get(j, "prob_clip", c.prob_clip);
  get(j, "seed", c.seed);
}

inline nlohmann::json to_json(const PlcsdConfig& c) {
  return {{"d_c", c.d_c},
          {"d_s", c.d_s},
          {"encoder_width", c.encoder_width},
          {"decoder_width", c.decoder_width},
          {"classifier_hidden", c.classifier_hidden},
          {"discriminator_width", c.discriminator_width},
          {"lr_auto", c.lr_auto},
          {"lr_collab", c.lr_collab},
          {"lr_style_dis", c.lr_style_dis},
          {"lr_style_gen", c.lr_style_gen},
          {"lr_seg_dis", c.lr_seg_dis},
          {"lr_seg_gen", c.lr_seg_gen},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"gate_threshold", c.gate_threshold},
          {"max_decode_frames", c.max_decode_frames},
          {"early_stop_patience", c.early_stop_patience},
          {"early_stop_min_rel", c.early_stop_min_rel},
          {"val_fraction", c.val_fraction},
          {"prob_clip", c.prob_clip},
          {"seed", c.seed}};
}

inline void from_json_into(const nlohmann::json& j, AcousticConfig& c) {
  using cfgjson::get;
  get(j, "d_t", c.d_t);
  get(j, "d_s", c.d_s);
  get(j, "decoder_width", c.decoder_width);
  get(j, "attention_dim", c.attention_dim);
  get(j, "location_channels", c.location_channels);
  get(j, "location_kernel", c.location_kernel);
  std::string attn = "location";
  get(j, "attention", attn);
  if (attn == "location")
    c.attention = AttentionKind::location_sensitive;
  else if (attn == "content")
    c.attention = AttentionKind::content_based;
  else
    throw validation_error("acoustic.attention must be location|content");
  get(j, "lr", c.lr);
  get(j, "max_epochs", c.max_epochs);
  get(j, "gate_weight", c.gate_weight);
  get(j, "gate_threshold", c.gate_threshold);
  get(j, "max_decode_frames", c.max_decode_frames);
  get(j, "prob_clip", c.prob_clip);
  get(j, "seed", c.seed);
}

inline nlohmann::json to_json(const AcousticConfig& c) {
  return {{"d_t", c.d_t},
          {"d_s", c.d_s},
          {"decoder_width", c.decoder_width},
          {"attention_dim", c.attention_dim},
          {"location_channels", c.location_channels},
          {"location_kernel", c.location_kernel},
          {"attention", c.attention == AttentionKind::location_sensitive
                            ? "location"
                            : "content"},
          {"lr", c.lr},
          {"max_epochs", c.max_epochs},
          {"gate_weight", c.gate_weight},
          {"gate_threshold", c.gate_threshold},
          {"max_decode_frames", c.max_decode_frames},
          {"prob_clip", c.prob_clip},
          {"seed", c.seed}};
}

inline void from_json_into(const nlohmann::json& j, PredictorConfig& c) {
  using cfgjson::get;
  get(j, "d_t", c.d_t);
  get(j, "d_s", c.d_s);
  get(j, "blocks", c.blocks);
  get(j, "model_dim", c.model_dim);
  get(j, "ff_dim", c.ff_dim);
  get(j, "conv_kernel", c.conv_kernel);
  get(j, "lr", c.lr);
  get(j, "max_epochs", c.max_epochs);
  get(j, "seed", c.seed);
}

inline nlohmann::json to_json(const PredictorConfig& c) {
  return {{"d_t", c.d_t},       {"d_s", c.d_s},
          {"blocks", c.blocks}, {"model_dim", c.model_dim},
          {"ff_dim", c.ff_dim}, {"conv_kernel", c.conv_kernel},
          {"lr", c.lr},         {"max_epochs", c.max_epochs},
          {"seed", c.seed}};
}

inline void from_json_into(const nlohmann::json& j, SyntheticConfig& c) {
  using cfgjson::get;
  get(j, "n_phones", c.n_phones);
  get(j, "n_styles", c.n_styles);
  get(j, "n_mels", c.n_mels);
  get(j, "min_frames", c.min_frames);
  get(j, "max_frames", c.max_frames);
  get(j, "template_sd", c.template_sd);
  get(j, "contour_amplitude", c.contour_amplitude);
  get(j, "noise_sd", c.noise_sd);
  get(j, "frame_shift", c.frame_shift);
  get(j, "sample_rate", c.sample_rate);
}

inline nlohmann::json to_json(const SyntheticConfig& c) {
  return {{"n_phones", c.n_phones},
          {"n_styles", c.n_styles},
          {"n_mels", c.n_mels},
          {"min_frames", c.min_frames},
          {"max_frames", c.max_frames},
          {"template_sd", c.template_sd},
          {"contour_amplitude", c.contour_amplitude},
          {"noise_sd", c.noise_sd},
          {"frame_shift", c.frame_shift},
          {"sample_rate", c.sample_rate}};
}

inline void from_json_into(const nlohmann::json& j, PitchConfig& c) {
  using cfgjson::get;
  get(j, "f_min", c.f_min);
  get(j, "f_max", c.f_max);
  get(j, "window", c.window);
  get(j, "hop", c.hop);
  get(j, "voicing_threshold", c.voicing_threshold);
  get(j, "silence_rms", c.silence_rms);
}

inline nlohmann::json to_json(const PitchConfig& c) {
  return {{"f_min", c.f_min},
          {"f_max", c.f_max},
          {"window", c.window},
          {"hop", c.hop},
          {"voicing_threshold", c.voicing_threshold},
          {"silence_rms", c.silence_rms}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using cfgjson::get;
  RunConfig c;
  get(j, "seed", c.seed);
  get(j, "deterministic", c.deterministic);
  get(j, "output_dir", c.output_dir);
  if (j.contains("inventory")) {
    const auto& ji = j.at("inventory");
    get(ji, "kind", c.inventory.kind);
    get(ji, "n_phones", c.inventory.n_phones);
    get(ji, "phones", c.inventory.phones);
  }
  if (j.contains("silence_labels"))
    c.silence.labels = j.at("silence_labels").get<std::vector<std::string>>();
  if (j.contains("corpus")) {
    const auto& jc = j.at("corpus");
    get(jc, "manifest", c.corpus.manifest);
    get(jc, "train_fraction", c.corpus.train_fraction);
    get(jc, "split_seed", c.corpus.split_seed);
  }
  if (j.contains("mel")) from_json_into(j.at("mel"), c.mel);
  if (j.contains("plcsd")) from_json_into(j.at("plcsd"), c.plcsd);
  if (j.contains("acoustic")) from_json_into(j.at("acoustic"), c.acoustic);
  if (j.contains("predictor")) from_json_into(j.at("predictor"), c.predictor);
  if (j.contains("vocoder")) {
    get(j.at("vocoder"), "griffin_lim_iters", c.vocoder.griffin_lim_iters);
    get(j.at("vocoder"), "pinv_regularizer", c.vocoder.pinv_regularizer);
  }
  if (j.contains("pitch")) from_json_into(j.at("pitch"), c.pitch);
  if (j.contains("synthetic")) {
    const auto& js = j.at("synthetic");
    from_json_into(js, c.synthetic.generator);
    get(js, "n_utterances", c.synthetic.n_utterances);
    get(js, "phones_per_utterance", c.synthetic.phones_per_utterance);
    get(js, "frames_per_segment", c.synthetic.frames_per_segment);
    get(js, "style_per_utterance", c.synthetic.style_per_utterance);
    get(js, "seed", c.synthetic.seed);
  }
  return c;
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["deterministic"] = c.deterministic;
  j["output_dir"] = c.output_dir;
  j["inventory"] = {{"kind", c.inventory.kind},
                    {"n_phones", c.inventory.n_phones},
                    {"phones", c.inventory.phones}};
  j["silence_labels"] = c.silence.labels;
  j["corpus"] = {{"manifest", c.corpus.manifest},
                 {"train_fraction", c.corpus.train_fraction},
                 {"split_seed", c.corpus.split_seed}};
  j["mel"] = to_json(c.mel);
  j["plcsd"] = to_json(c.plcsd);
  j["acoustic"] = to_json(c.acoustic);
  j["predictor"] = to_json(c.predictor);
  j["vocoder"] = {{"griffin_lim_iters", c.vocoder.griffin_lim_iters},
                  {"pinv_regularizer", c.vocoder.pinv_regularizer}};
  j["pitch"] = to_json(c.pitch);
  nlohmann::json js = to_json(c.synthetic.generator);
  js["n_utterances"] = c.synthetic.n_utterances;
  js["phones_per_utterance"] = c.synthetic.phones_per_utterance;
  js["frames_per_segment"] = c.synthetic.frames_per_segment;
  js["style_per_utterance"] = c.synthetic.style_per_utterance;
  js["seed"] = c.synthetic.seed;
  j["synthetic"] = js;
  return j;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("load_run_config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error("load_run_config: " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

// Stable hash of the effective configuration.
inline std::string config_hash(const RunConfig& c) {
  return hex64(fnv1a64(run_config_to_json(c).dump()));
}

}  // namespace csd
