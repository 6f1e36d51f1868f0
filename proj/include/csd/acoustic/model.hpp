#pragma once

// Utterance-level models: the text encoder (learned per-phone embedding
// table) and the acoustic model, an attention-based autoregressive decoder
// from combined (text, style) embedding sequences to mel frames.
// Location-sensitive attention by default, plain content-based attention as
// a config option.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "csd/autodiff.hpp"
#include "csd/common.hpp"
#include "csd/corpus/types.hpp"
#include "csd/nn.hpp"

namespace csd {

using TextSequence = std::vector<Eigen::VectorXd>;      // one d_t vector per phone
using StyleEmbeddingSequence = std::vector<Eigen::VectorXd>;
using CombinedSequence = std::vector<Eigen::VectorXd>;  // d_t + d_s per phone

namespace acoustic_groups {
inline constexpr const char* text_encoder = "theta_text";
inline constexpr const char* acoustic_model = "theta_am";
inline constexpr const char* style_predictor = "theta_sp";
inline constexpr const char* predictor_stats = "theta_sp_stats";
}  // namespace acoustic_groups

enum class AttentionKind { location_sensitive, content_based };

struct AcousticConfig {
  long d_t = 64;       // text embedding dimension
  long d_s = 64;       // style embedding dimension (must match the encoder)
  long decoder_width = 128;
  long attention_dim = 64;
  long location_channels = 8;
  long location_kernel = 5;  // odd
  AttentionKind attention = AttentionKind::location_sensitive;

  double lr = 1e-3;
  long max_epochs = 30;
  double gate_weight = 1.0;
  double gate_threshold = 0.5;
  long max_decode_frames = 400;
  double prob_clip = 1e-7;
  std::uint64_t seed = 0;

  void validate() const {
    if (d_t <= 0 || d_s <= 0 || decoder_width <= 0 || attention_dim <= 0)
      throw validation_error("AcousticConfig: widths must be positive");
    if (location_kernel < 1 || location_kernel % 2 == 0)
      throw validation_error("AcousticConfig: location_kernel must be odd");
    if (location_channels <= 0)
      throw validation_error("AcousticConfig: location_channels positive");
    if (lr <= 0 || max_epochs <= 0 || max_decode_frames <= 0)
      throw validation_error("AcousticConfig: bad training parameters");
    if (!(gate_threshold > 0 && gate_threshold < 1))
      throw validation_error("AcousticConfig: gate_threshold in (0,1)");
  }
};

// ---- text encoder ----

inline ParamGroup make_text_encoder_group(long d_t, long n_phones, Rng rng) {
  ParamGroup g{acoustic_groups::text_encoder, {}};
  g.tensors.push_back(
      {"embed", init_uniform_fan_in(d_t, n_phones, d_t, rng), {}});
  return g;
}

inline TextSequence encode_text(const std::vector<std::string>& phones,
                                const ParamGroup& text_group,
                                const PhoneInventory& inventory) {
  if (phones.empty()) throw validation_error("encode_text: empty phone list");
  const Mat& table = text_group.tensor("embed").value;
  TextSequence out;
  out.reserve(phones.size());
  for (const auto& p : phones) {
    if (!inventory.contains(p))
      throw validation_error("encode_text: unknown phone '" + p + "'");
    out.push_back(table.col(inventory.index(p)));
  }
  return out;
}

// Tape-side lookup used during joint training.
inline Var encode_text_var(Tape& tape, Binder& binder, ParamGroup& text_group,
                           const std::vector<std::string>& phones,
                           const PhoneInventory& inventory, bool trainable) {
  Var table = binder.bind(text_group.tensor("embed"), trainable);
  std::vector<long> idx;
  idx.reserve(phones.size());
  for (const auto& p : phones) {
    if (!inventory.contains(p))
      throw validation_error("encode_text: unknown phone '" + p + "'");
    idx.push_back(inventory.index(p));
  }
  return ad::gather_cols(table, idx);  // d_t x m
}

// ---- combination ----

inline CombinedSequence combine(const TextSequence& text,
                                const StyleEmbeddingSequence& style) {
  if (text.size() != style.size())
    throw validation_error("combine: length mismatch (" +
                           std::to_string(text.size()) + " vs " +
                           std::to_string(style.size()) + ")");
  if (text.empty()) throw validation_error("combine: empty sequences");
  CombinedSequence out;
  out.reserve(text.size());
  for (std::size_t k = 0; k < text.size(); ++k) {
    Eigen::VectorXd v(text[k].size() + style[k].size());
    v << text[k], style[k];
    out.push_back(std::move(v));
  }
  return out;
}

// ---- acoustic model ----

inline ParamGroup make_acoustic_group(const AcousticConfig& cfg, long n_mels,
                                      Rng rng) {
  ParamGroup g{acoustic_groups::acoustic_model, {}};
  long d_in = cfg.d_t + cfg.d_s;
  add_linear(g, "mem", cfg.attention_dim, d_in, rng);
  add_linear(g, "query", cfg.attention_dim, cfg.decoder_width, rng);
  g.tensors.push_back({"loc_conv",
                       init_uniform_fan_in(cfg.location_channels,
                                           cfg.location_kernel,
                                           cfg.location_kernel, rng),
                       {}});
  g.tensors.push_back({"loc_proj",
                       init_uniform_fan_in(cfg.attention_dim,
                                           cfg.location_channels,
                                           cfg.location_channels, rng),
                       {}});
  g.tensors.push_back(
      {"score", init_uniform_fan_in(1, cfg.attention_dim, cfg.attention_dim, rng), {}});
  add_lstm(g, "lstm", cfg.decoder_width, n_mels + d_in, rng);
  add_linear(g, "frame", n_mels, cfg.decoder_width + d_in, rng);
  add_linear(g, "gate", 1, cfg.decoder_width + d_in, rng);
  return g;
}

struct AcousticVars {
  LinearVars mem, query;
  Var loc_conv, loc_proj, score;
  LstmVars lstm;
  LinearVars frame_head, gate_head;
};

inline AcousticVars bind_acoustic(Binder& binder, ParamGroup& g,
                                  bool trainable) {
  AcousticVars v;
  v.mem = bind_linear(binder, g, "mem", trainable);
  v.query = bind_linear(binder, g, "query", trainable);
  v.loc_conv = binder.bind(g.tensor("loc_conv"), trainable);
  v.loc_proj = binder.bind(g.tensor("loc_proj"), trainable);
  v.score = binder.bind(g.tensor("score"), trainable);
  v.lstm = bind_lstm(binder, g, "lstm", trainable);
  v.frame_head = bind_linear(binder, g, "frame", trainable);
  v.gate_head = bind_linear(binder, g, "gate", trainable);
  return v;
}

struct AcousticStepOutput {
  Var frame;       // n_mels x 1
  Var gate_logit;  // 1 x 1
  Var alignment;   // m x 1
};

struct AcousticDecodeState {
  LstmState lstm;
  Var alignment;  // m x 1
};

// One attention + decoder step. prev_frame is (n_mels x 1).
inline AcousticStepOutput acoustic_step(Tape& tape, const AcousticVars& am,
                                        const AcousticConfig& cfg, Var memory,
                                        Var keys, Var prev_frame,
                                        AcousticDecodeState& state) {
  using namespace ad;
  long m = tape.value(memory).cols();

  // attention energies over positions
  Var arg = add_colvec(keys, linear(am.query, state.lstm.h));
  if (cfg.attention == AttentionKind::location_sensitive) {
    // location features: 1D conv of the previous alignment over positions
    Var prev_row = transpose(state.alignment);  // 1 x m
    long half = tape.value(am.loc_conv).cols() / 2;
    Var stacked{};  // kernel x m
    bool first = true;
    for (long off = -half; off <= half; ++off) {
      Var shifted = shift_cols(prev_row, off);
      stacked = first ? shifted : concat_vert(stacked, shifted);
      first = false;
    }
    Var loc_feat = matmul(am.loc_conv, stacked);          // channels x m
    arg = add(arg, matmul(am.loc_proj, loc_feat));        // attn x m
  }
  Var scores = transpose(matmul(am.score, tanh_(arg)));   // m x 1
  Var alignment = softmax_cols(scores);
  Var context = matmul(memory, alignment);                // d_in x 1

  Var x = concat_vert(prev_frame, context);
  state.lstm = lstm_step(am.lstm, x, state.lstm);
  Var hc = concat_vert(state.lstm.h, context);
  AcousticStepOutput out;
  out.frame = linear(am.frame_head, hc);
  out.gate_logit = linear(am.gate_head, hc);
  out.alignment = alignment;
  state.alignment = alignment;
  (void)m;
  return out;
}

// Prepares memory/keys and the initial state (alignment one-hot on the first
// phone).
inline std::pair<Var, Var> acoustic_memory(Tape& tape, const AcousticVars& am,
                                           const CombinedSequence& combined) {
  if (combined.empty())
    throw validation_error("acoustic_forward: empty combined sequence");
  long d_in = combined.front().size();
  long m = static_cast<long>(combined.size());
  Mat mem(d_in, m);
  for (long k = 0; k < m; ++k) mem.col(k) = combined[static_cast<std::size_t>(k)];
  Var memory = tape.constant(std::move(mem));
  Var keys = linear(am.mem, memory);
  return {memory, keys};
}

inline AcousticDecodeState acoustic_init_state(Tape& tape,
                                               const AcousticConfig& cfg,
                                               long m) {
  AcousticDecodeState st;
  st.lstm = lstm_init_state(tape, cfg.decoder_width, 1);
  Mat a0 = Mat::Zero(m, 1);
  a0(0, 0) = 1.0;
  st.alignment = tape.constant(std::move(a0));
  return st;
}

struct AcousticResult {
  MelSpectrogram mel;
  std::vector<double> gates;
  bool truncated = false;
};

// Value-mode forward. Teacher-forced when teacher != nullptr (exactly the
// teacher's length), free-run otherwise.
inline AcousticResult acoustic_forward(const CombinedSequence& combined,
                                       const MelSpectrogram* teacher,
                                       ParamGroup& am_group,
                                       const AcousticConfig& cfg,
                                       double frame_shift = 0.0) {
  cfg.validate();
  Tape tape(false);
  Binder binder(tape);
  AcousticVars am = bind_acoustic(binder, am_group, false);
  long n_mels = tape.value(am.frame_head.w).rows();
  if (teacher != nullptr && teacher->n_mels() != n_mels)
    throw validation_error("acoustic_forward: teacher band count mismatch");

  auto [memory, keys] = acoustic_memory(tape, am, combined);
  AcousticDecodeState state =
      acoustic_init_state(tape, cfg, static_cast<long>(combined.size()));

  AcousticResult result;
  result.mel.frame_shift = teacher ? teacher->frame_shift : frame_shift;
  result.mel.frame_length = teacher ? teacher->frame_length : frame_shift;
  result.mel.sample_rate = teacher ? teacher->sample_rate : 0.0;
  long limit = teacher ? teacher->n_frames() : cfg.max_decode_frames;

  Mat prev = Mat::Zero(n_mels, 1);
  std::vector<Eigen::VectorXf> frames;
  for (long t = 0; t < limit; ++t) {
    AcousticStepOutput out =
        acoustic_step(tape, am, cfg, memory, keys, tape.constant(prev), state);
    Eigen::VectorXd fv = tape.value(out.frame).col(0);
    double gv = 1.0 / (1.0 + std::exp(-tape.scalar_value(out.gate_logit)));
    if (!fv.allFinite() || !std::isfinite(gv))
      throw numeric_error("acoustic model: non-finite output at frame " +
                          std::to_string(t));
    frames.push_back(fv.cast<float>());
    result.gates.push_back(gv);
    if (teacher != nullptr) {
      prev = teacher->data.col(t).cast<double>();
    } else {
      if (gv >= cfg.gate_threshold) break;
      prev = fv;
    }
  }
  if (teacher == nullptr &&
      static_cast<long>(frames.size()) == cfg.max_decode_frames &&
      (result.gates.empty() || result.gates.back() < cfg.gate_threshold))
    result.truncated = true;

  result.mel.data.resize(n_mels, static_cast<long>(frames.size()));
  for (std::size_t t = 0; t < frames.size(); ++t)
    result.mel.data.col(static_cast<long>(t)) = frames[t];
  return result;
}

}  // namespace csd
