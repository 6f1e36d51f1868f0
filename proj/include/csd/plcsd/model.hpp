#pragma once

// PL-CSD model components: content/style encoders (bidirectional LSTM, last
// cell states projected to the embedding), autoregressive segment decoder
// (LSTM conditioned on [previous frame; z_c; z_s] with mel and gate heads),
// two phone classifiers, and the natural-vs-synthesized segment
// discriminator.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "csd/autodiff.hpp"
#include "csd/common.hpp"
#include "csd/corpus/types.hpp"
#include "csd/nn.hpp"
#include "csd/plcsd/config.hpp"

namespace csd {

struct ContentEmbedding {
  Eigen::VectorXd values;
  long dim() const { return values.size(); }
};

struct StyleEmbedding {
  Eigen::VectorXd values;
  long dim() const { return values.size(); }
};

struct PhonePosterior {
  Eigen::VectorXd probs;

  void validate() const {
    if (probs.minCoeff() < 0.0)
      throw numeric_error("PhonePosterior: negative probability");
    if (std::abs(probs.sum() - 1.0) > 1e-6)
      throw numeric_error("PhonePosterior: probabilities do not sum to 1");
  }
  int argmax() const {
    long idx = 0;
    probs.maxCoeff(&idx);
    return static_cast<int>(idx);
  }
};

struct GateSequence {
  std::vector<double> probs;  // per decoded frame, in [0,1]
};

struct DecodeResult {
  MelSpectrogram mel;
  GateSequence gates;
  bool truncated = false;
};

// Group names used throughout training and checkpoints.
namespace plcsd_groups {
inline constexpr const char* content_encoder = "theta_Ec";
inline constexpr const char* style_encoder = "theta_Es";
inline constexpr const char* decoder = "theta_D";
inline constexpr const char* content_classifier = "theta_Cc";
inline constexpr const char* style_classifier = "theta_Cs";
inline constexpr const char* segment_discriminator = "theta_Cseg";
}  // namespace plcsd_groups

// ---- parameter construction ----

inline ParamGroup make_encoder_group(const std::string& name, long n_mels,
                                     long width, long emb_dim, Rng rng) {
  ParamGroup g{name, {}};
  long h = width / 2;
  add_lstm(g, "fwd", h, n_mels, rng);
  add_lstm(g, "bwd", h, n_mels, rng);
  add_linear(g, "proj", emb_dim, width, rng);
  return g;
}

inline ParamGroup make_decoder_group(const std::string& name, long n_mels,
                                     long width, long d_c, long d_s, Rng rng) {
  ParamGroup g{name, {}};
  add_lstm(g, "lstm", width, n_mels + d_c + d_s, rng);
  add_linear(g, "frame", n_mels, width, rng);
  add_linear(g, "gate", 1, width, rng);
  return g;
}

inline ParamGroup make_classifier_group(const std::string& name, long in_dim,
                                        long hidden, long n_classes, Rng rng) {
  ParamGroup g{name, {}};
  add_linear(g, "fc1", hidden, in_dim, rng);
  add_linear(g, "fc2", n_classes, hidden, rng);
  return g;
}

inline ParamGroup make_discriminator_group(const std::string& name, long n_mels,
                                           long width, Rng rng) {
  ParamGroup g{name, {}};
  add_lstm(g, "lstm", width, n_mels, rng);
  add_linear(g, "out", 1, width, rng);
  return g;
}

inline ModelParams init_plcsd_params(const PlcsdConfig& cfg, long n_mels,
                                     long n_phones) {
  cfg.validate();
  if (n_mels <= 0 || n_phones <= 1)
    throw validation_error("init_plcsd_params: bad n_mels/n_phones");
  Rng root(cfg.seed);
  ModelParams params;
  using namespace plcsd_groups;
  params.groups[content_encoder] = make_encoder_group(
      content_encoder, n_mels, cfg.encoder_width, cfg.d_c, root.fork(content_encoder));
  params.groups[style_encoder] = make_encoder_group(
      style_encoder, n_mels, cfg.encoder_width, cfg.d_s, root.fork(style_encoder));
  params.groups[decoder] = make_decoder_group(decoder, n_mels, cfg.decoder_width,
                                              cfg.d_c, cfg.d_s, root.fork(decoder));
  params.groups[content_classifier] =
      make_classifier_group(content_classifier, cfg.d_c, cfg.classifier_hidden,
                            n_phones, root.fork(content_classifier));
  params.groups[style_classifier] =
      make_classifier_group(style_classifier, cfg.d_s, cfg.classifier_hidden,
                            n_phones, root.fork(style_classifier));
  params.groups[segment_discriminator] = make_discriminator_group(
      segment_discriminator, n_mels, cfg.discriminator_width,
      root.fork(segment_discriminator));
  return params;
}

// ---- batched tape builders ----

// Segments of equal frame count processed as one (dim x batch) LSTM batch.
// source_positions[b] is the index of column b in the original batch.
struct SegmentGroup {
  long n_frames = 0;
  std::vector<const PhoneSegment*> segments;
  std::vector<std::size_t> source_positions;
};

// Stable grouping by length, ascending; within a group the input order is
// preserved.
inline std::vector<SegmentGroup> group_by_length(
    const std::vector<const PhoneSegment*>& batch) {
  std::vector<SegmentGroup> groups;
  std::vector<long> lengths;
  for (const PhoneSegment* seg : batch) {
    if (seg->n_frames() < 1)
      throw validation_error("segment " + seg->utterance_id +
                             " has no frames");
    lengths.push_back(seg->n_frames());
  }
  std::vector<long> unique = lengths;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  for (long len : unique) {
    SegmentGroup g;
    g.n_frames = len;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch[i]->n_frames() == len) {
        g.segments.push_back(batch[i]);
        g.source_positions.push_back(i);
      }
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

// Frame t of every segment in the group as an (n_mels x B) constant.
inline Var group_frame_constant(Tape& tape, const SegmentGroup& g, long t) {
  long n_mels = g.segments.front()->mel.n_mels();
  Mat frame(n_mels, static_cast<long>(g.segments.size()));
  for (std::size_t b = 0; b < g.segments.size(); ++b)
    frame.col(static_cast<long>(b)) =
        g.segments[b]->mel.data.col(t).cast<double>();
  return tape.constant(std::move(frame));
}

struct EncoderVars {
  LstmVars fwd, bwd;
  LinearVars proj;
};

inline EncoderVars bind_encoder(Binder& binder, ParamGroup& g, bool trainable) {
  return EncoderVars{bind_lstm(binder, g, "fwd", trainable),
                     bind_lstm(binder, g, "bwd", trainable),
                     bind_linear(binder, g, "proj", trainable)};
}

// Bidirectional encode of an equal-length group: last cell states of both
// directions, concatenated and projected. Returns (emb_dim x B).
inline Var encode_group(Tape& tape, const EncoderVars& enc,
                        const SegmentGroup& g) {
  long B = static_cast<long>(g.segments.size());
  std::vector<Var> inputs;
  inputs.reserve(static_cast<std::size_t>(g.n_frames));
  for (long t = 0; t < g.n_frames; ++t)
    inputs.push_back(group_frame_constant(tape, g, t));

  LstmState fs = lstm_init_state(tape, enc.fwd.hidden, B);
  for (long t = 0; t < g.n_frames; ++t)
    fs = lstm_step(enc.fwd, inputs[static_cast<std::size_t>(t)], fs);
  LstmState bs = lstm_init_state(tape, enc.bwd.hidden, B);
  for (long t = g.n_frames - 1; t >= 0; --t)
    bs = lstm_step(enc.bwd, inputs[static_cast<std::size_t>(t)], bs);

  Var cells = ad::concat_vert(fs.c, bs.c);
  return linear(enc.proj, cells);
}

struct DecoderVars {
  LstmVars lstm;
  LinearVars frame_head;
  LinearVars gate_head;
};

inline DecoderVars bind_decoder(Binder& binder, ParamGroup& g, bool trainable) {
  return DecoderVars{bind_lstm(binder, g, "lstm", trainable),
                     bind_linear(binder, g, "frame", trainable),
                     bind_linear(binder, g, "gate", trainable)};
}

struct DecodedGroup {
  std::vector<Var> frames;       // each (n_mels x B)
  std::vector<Var> gate_logits;  // each (1 x B)
};

// Teacher-forced decode: step t consumes the ground-truth frame t-1 (zero
// frame at t=0) plus the two embeddings, and predicts frame t.
inline DecodedGroup decode_group_teacher(Tape& tape, const DecoderVars& dec,
                                         Var z_c, Var z_s,
                                         const SegmentGroup& g) {
  long B = static_cast<long>(g.segments.size());
  long n_mels = g.segments.front()->mel.n_mels();
  Var z = ad::concat_vert(z_c, z_s);
  LstmState s = lstm_init_state(tape, dec.lstm.hidden, B);
  DecodedGroup out;
  Var prev = tape.constant(Mat::Zero(n_mels, B));
  for (long t = 0; t < g.n_frames; ++t) {
    Var input = ad::concat_vert(prev, z);
    s = lstm_step(dec.lstm, input, s);
    out.frames.push_back(linear(dec.frame_head, s.h));
    out.gate_logits.push_back(linear(dec.gate_head, s.h));
    // step t+1 consumes ground-truth frame t
    if (t + 1 < g.n_frames) prev = group_frame_constant(tape, g, t);
  }
  return out;
}

struct DiscriminatorVars {
  LstmVars lstm;
  LinearVars out;
};

inline DiscriminatorVars bind_discriminator(Binder& binder, ParamGroup& g,
                                            bool trainable) {
  return DiscriminatorVars{bind_lstm(binder, g, "lstm", trainable),
                           bind_linear(binder, g, "out", trainable)};
}

// Discriminator probability P(natural) for a sequence of (n_mels x B) frames.
inline Var discriminate_frames(Tape& tape, const DiscriminatorVars& disc,
                               const std::vector<Var>& frames, long batch,
                               double prob_clip) {
  auto [hs, fin] = lstm_run(disc.lstm, frames, batch);
  Var logit = linear(disc.out, fin.c);
  return ad::clip(ad::sigmoid(logit), prob_clip, 1.0 - prob_clip);
}

struct ClassifierVars {
  LinearVars fc1, fc2;
};

inline ClassifierVars bind_classifier(Binder& binder, ParamGroup& g,
                                      bool trainable) {
  return ClassifierVars{bind_linear(binder, g, "fc1", trainable),
                        bind_linear(binder, g, "fc2", trainable)};
}

// Posterior over phones: softmax(fc2(tanh(fc1(z)))), one column per item.
inline Var classify(Tape& tape, const ClassifierVars& clf, Var z) {
  (void)tape;
  return ad::softmax_cols(linear(clf.fc2, ad::tanh_(linear(clf.fc1, z))));
}

// ---- public single-item forward operations ----

namespace detail {

inline SegmentGroup single_group(const PhoneSegment& seg) {
  if (seg.n_frames() < 1)
    throw validation_error("segment " + seg.utterance_id + ": no frames");
  SegmentGroup g;
  g.n_frames = seg.n_frames();
  g.segments = {&seg};
  return g;
}

inline Eigen::VectorXd encode_single(const PhoneSegment& seg, ParamGroup& group,
                                     const char* component) {
  Tape tape(false);
  Binder binder(tape);
  EncoderVars enc = bind_encoder(binder, group, false);
  Var emb = encode_group(tape, enc, single_group(seg));
  Eigen::VectorXd out = tape.value(emb).col(0);
  if (!out.allFinite())
    throw numeric_error(std::string(component) +
                        ": non-finite activations for segment " +
                        seg.utterance_id);
  return out;
}

}  // namespace detail

inline ContentEmbedding encode_content(const PhoneSegment& seg,
                                       ModelParams& params) {
  return ContentEmbedding{detail::encode_single(
      seg, params.group(plcsd_groups::content_encoder), "content encoder")};
}

inline StyleEmbedding encode_style(const PhoneSegment& seg,
                                   ModelParams& params) {
  return StyleEmbedding{detail::encode_single(
      seg, params.group(plcsd_groups::style_encoder), "style encoder")};
}

namespace detail {

inline PhonePosterior classify_single(const Eigen::VectorXd& z,
                                      ParamGroup& group, const char* component) {
  Tape tape(false);
  Binder binder(tape);
  ClassifierVars clf = bind_classifier(binder, group, false);
  long expected = tape.value(clf.fc1.w).cols();
  if (z.size() != expected)
    throw validation_error(std::string(component) + ": embedding dimension " +
                           std::to_string(z.size()) + " != expected " +
                           std::to_string(expected));
  Var probs = classify(tape, clf, tape.constant(z));
  PhonePosterior out{tape.value(probs).col(0)};
  if (!out.probs.allFinite())
    throw numeric_error(std::string(component) + ": non-finite posterior");
  return out;
}

}  // namespace detail

inline PhonePosterior classify_content_phone(const ContentEmbedding& z,
                                             ModelParams& params) {
  return detail::classify_single(
      z.values, params.group(plcsd_groups::content_classifier),
      "content classifier");
}

inline PhonePosterior classify_style_phone(const StyleEmbedding& z,
                                           ModelParams& params) {
  return detail::classify_single(z.values,
                                 params.group(plcsd_groups::style_classifier),
                                 "style classifier");
}

inline double discriminate_segment(const MelSpectrogram& seg_mel,
                                   ModelParams& params,
                                   double prob_clip = 1e-7) {
  if (seg_mel.n_frames() < 1)
    throw validation_error("discriminate_segment: empty mel");
  Tape tape(false);
  Binder binder(tape);
  DiscriminatorVars disc = bind_discriminator(
      binder, params.group(plcsd_groups::segment_discriminator), false);
  std::vector<Var> frames;
  for (long t = 0; t < seg_mel.n_frames(); ++t)
    frames.push_back(tape.constant(seg_mel.data.col(t).cast<double>()));
  Var p = discriminate_frames(tape, disc, frames, 1, prob_clip);
  double out = tape.scalar_value(p);
  if (!std::isfinite(out))
    throw numeric_error("segment discriminator: non-finite output");
  return out;
}

// Decode from embeddings. With a teacher mel the decode is teacher-forced to
// exactly the teacher's length; otherwise it free-runs from a zero frame
// until the gate fires or max_frames is hit (truncated=true then).
inline DecodeResult decode_segment(const ContentEmbedding& z_c,
                                   const StyleEmbedding& z_s,
                                   const MelSpectrogram* teacher,
                                   ModelParams& params, const PlcsdConfig& cfg,
                                   double frame_shift = 0.0) {
  Tape tape(false);
  Binder binder(tape);
  DecoderVars dec =
      bind_decoder(binder, params.group(plcsd_groups::decoder), false);
  long n_mels = tape.value(dec.frame_head.w).rows();
  if (teacher != nullptr && teacher->n_mels() != n_mels)
    throw validation_error("decode_segment: teacher band count mismatch");

  Var z = ad::concat_vert(tape.constant(z_c.values), tape.constant(z_s.values));
  LstmState s = lstm_init_state(tape, dec.lstm.hidden, 1);
  Mat prev = Mat::Zero(n_mels, 1);

  DecodeResult result;
  result.mel.frame_shift = teacher ? teacher->frame_shift : frame_shift;
  result.mel.frame_length = teacher ? teacher->frame_length : frame_shift;
  result.mel.sample_rate = teacher ? teacher->sample_rate : 0.0;
  long limit = teacher ? teacher->n_frames() : cfg.max_decode_frames;
  std::vector<Eigen::VectorXf> frames;
  for (long t = 0; t < limit; ++t) {
    Var input = ad::concat_vert(tape.constant(prev), z);
    s = lstm_step(dec.lstm, input, s);
    Var frame = linear(dec.frame_head, s.h);
    Var gate = ad::sigmoid(linear(dec.gate_head, s.h));
    Eigen::VectorXd fv = tape.value(frame).col(0);
    double gv = tape.scalar_value(gate);
    if (!fv.allFinite() || !std::isfinite(gv))
      throw numeric_error("segment decoder: non-finite output at frame " +
                          std::to_string(t));
    frames.push_back(fv.cast<float>());
    result.gates.probs.push_back(gv);
    if (teacher != nullptr) {
      prev = teacher->data.col(t).cast<double>();
    } else {
      if (gv >= cfg.gate_threshold) break;
      prev = fv;
    }
  }
  if (teacher == nullptr &&
      static_cast<long>(frames.size()) == cfg.max_decode_frames &&
      (result.gates.probs.empty() ||
       result.gates.probs.back() < cfg.gate_threshold))
    result.truncated = true;

  result.mel.data.resize(n_mels, static_cast<long>(frames.size()));
  for (std::size_t t = 0; t < frames.size(); ++t)
    result.mel.data.col(static_cast<long>(t)) = frames[t];
  return result;
}

}  // namespace csd
