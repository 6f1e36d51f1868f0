#pragma once

// The seven PL-CSD training losses.
//
//   auto loss          reconstruction: per-frame-averaged spectrogram L2 plus
//                      per-frame-averaged gate BCE, summed over the batch
//   content class      sum of -log P(true phone | content embedding)
//   contrast           sum of ||E_c(s_i) - E_c(s_j)||_2 over same-phone pairs
//   style dis          cross-entropy through the style path, classifier only
//   style gen          sum of |P(w) - 1/N_w| over phones, style encoder only
//   segment dis        discriminator BCE on (natural, reconstructed) pairs
//   segment gen        -log C_seg(reconstruction), generator side
//
// Each loss has a tape builder (used by training, with per-group
// trainability) and a plain value entry point. Value-level helpers at the
// bottom give the test suite independent seams for the hand-derived cases.

#include <algorithm>
#include <string>
#include <vector>

#include "csd/autodiff.hpp"
#include "csd/corpus/types.hpp"
#include "csd/nn.hpp"
#include "csd/plcsd/config.hpp"
#include "csd/plcsd/model.hpp"

namespace csd {

using SegmentBatch = std::vector<const PhoneSegment*>;

inline SegmentBatch as_batch(const std::vector<PhoneSegment>& segments) {
  SegmentBatch b;
  b.reserve(segments.size());
  for (const auto& s : segments) b.push_back(&s);
  return b;
}

namespace lossdetail {

inline void require_nonempty(const SegmentBatch& batch, const char* name) {
  if (batch.empty())
    throw validation_error(std::string(name) + ": empty batch");
}

// Gate targets are 0 for non-final frames and 1 for the final frame.
// BCE over the (1 x B) gate probability row for one time step.
inline Var gate_bce_row(Tape& tape, Var probs, bool final_frame,
                        double prob_clip) {
  Var p = ad::clip(probs, prob_clip, 1.0 - prob_clip);
  if (final_frame) return ad::scale(ad::sum_all(ad::log_(p)), -1.0);
  Var one_minus = ad::add_scalar(ad::scale(p, -1.0), 1.0);
  return ad::scale(ad::sum_all(ad::log_(one_minus)), -1.0);
}

inline std::vector<long> true_phone_rows(const SegmentGroup& g,
                                         const PhoneInventory& inventory) {
  std::vector<long> rows;
  rows.reserve(g.segments.size());
  for (const PhoneSegment* seg : g.segments)
    rows.push_back(inventory.index(seg->phone));
  return rows;
}

}  // namespace lossdetail

// ---- Eq-style builders ----

// Reconstruction loss, teacher forced. Per segment the spectrogram term is
// (1/n) sum_t ||pred_t - f_t||^2 and the gate term (1/n) sum_t BCE_t; the
// batch value is the sum over segments.
inline Var build_auto_loss(Tape& tape, Binder& binder, ModelParams& params,
                           const SegmentBatch& batch, const PlcsdConfig& cfg,
                           bool train_encoders, bool train_decoder) {
  lossdetail::require_nonempty(batch, "auto_loss");
  EncoderVars enc_c = bind_encoder(
      binder, params.group(plcsd_groups::content_encoder), train_encoders);
  EncoderVars enc_s = bind_encoder(
      binder, params.group(plcsd_groups::style_encoder), train_encoders);
  DecoderVars dec =
      bind_decoder(binder, params.group(plcsd_groups::decoder), train_decoder);

  Var total = tape.scalar(0.0);
  for (const SegmentGroup& g : group_by_length(batch)) {
    Var z_c = encode_group(tape, enc_c, g);
    Var z_s = encode_group(tape, enc_s, g);
    DecodedGroup decoded = decode_group_teacher(tape, dec, z_c, z_s, g);
    double inv_n = 1.0 / static_cast<double>(g.n_frames);
    Var spec = tape.scalar(0.0);
    Var gate = tape.scalar(0.0);
    for (long t = 0; t < g.n_frames; ++t) {
      Var target = group_frame_constant(tape, g, t);
      Var diff = ad::sub(decoded.frames[static_cast<std::size_t>(t)], target);
      spec = ad::add(spec, ad::sum_all(ad::square(diff)));
      Var probs =
          ad::sigmoid(decoded.gate_logits[static_cast<std::size_t>(t)]);
      gate = ad::add(gate, lossdetail::gate_bce_row(
                               tape, probs, t == g.n_frames - 1, cfg.prob_clip));
    }
    total = ad::add(total, ad::scale(ad::add(spec, gate), inv_n));
  }
  return total;
}

// Content-to-phone classification: sum over the batch of the negative log
// posterior at the true phone.
inline Var build_content_class_loss(Tape& tape, Binder& binder,
                                    ModelParams& params,
                                    const SegmentBatch& batch,
                                    const PhoneInventory& inventory,
                                    const PlcsdConfig& cfg, bool train_encoder,
                                    bool train_classifier) {
  lossdetail::require_nonempty(batch, "content_class_loss");
  EncoderVars enc = bind_encoder(
      binder, params.group(plcsd_groups::content_encoder), train_encoder);
  ClassifierVars clf = bind_classifier(
      binder, params.group(plcsd_groups::content_classifier), train_classifier);

  Var total = tape.scalar(0.0);
  for (const SegmentGroup& g : group_by_length(batch)) {
    Var z = encode_group(tape, enc, g);
    Var probs = classify(tape, clf, z);
    Var picked = ad::gather_rows_per_col(
        probs, lossdetail::true_phone_rows(g, inventory));
    Var logp =
        ad::log_(ad::clip(picked, cfg.prob_clip, 1.0 - cfg.prob_clip));
    total = ad::add(total, ad::scale(ad::sum_all(logp), -1.0));
  }
  return total;
}

// Contrast loss: sum over same-phone pairs (i < j in canonical order) of the
// L2 distance between content embeddings. Canonical ordering makes the value
// exactly invariant under batch permutation.
inline Var build_contrast_loss(Tape& tape, Binder& binder, ModelParams& params,
                               const SegmentBatch& batch, bool train_encoder) {
  lossdetail::require_nonempty(batch, "contrast_loss");
  SegmentBatch ordered = batch;
  std::sort(ordered.begin(), ordered.end(),
            [](const PhoneSegment* a, const PhoneSegment* b) {
              if (a->phone != b->phone) return a->phone < b->phone;
              if (a->utterance_id != b->utterance_id)
                return a->utterance_id < b->utterance_id;
              return a->index_in_utterance < b->index_in_utterance;
            });

  EncoderVars enc = bind_encoder(
      binder, params.group(plcsd_groups::content_encoder), train_encoder);

  // embedding column for each canonical position
  std::vector<std::pair<Var, long>> columns(ordered.size(), {Var{}, 0});
  for (const SegmentGroup& g : group_by_length(ordered)) {
    Var z = encode_group(tape, enc, g);
    for (std::size_t b = 0; b < g.segments.size(); ++b)
      columns[g.source_positions[b]] = {z, static_cast<long>(b)};
  }

  Var total = tape.scalar(0.0);
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    for (std::size_t j = i + 1; j < ordered.size(); ++j) {
      if (ordered[i]->phone != ordered[j]->phone) continue;
      Var ei = ad::select_col(columns[i].first, columns[i].second);
      Var ej = ad::select_col(columns[j].first, columns[j].second);
      total = ad::add(total, ad::l2norm(ad::sub(ei, ej)));
    }
  }
  return total;
}

// Style-path cross-entropy. Discrimination phase trains the classifier with
// the encoder frozen; the builder exposes both flags so the generation-side
// uniformity loss below can reuse the forward pass shape.
inline Var build_style_class_loss(Tape& tape, Binder& binder,
                                  ModelParams& params,
                                  const SegmentBatch& batch,
                                  const PhoneInventory& inventory,
                                  const PlcsdConfig& cfg, bool train_encoder,
                                  bool train_classifier) {
  lossdetail::require_nonempty(batch, "style_adv_dis_loss");
  EncoderVars enc = bind_encoder(
      binder, params.group(plcsd_groups::style_encoder), train_encoder);
  ClassifierVars clf = bind_classifier(
      binder, params.group(plcsd_groups::style_classifier), train_classifier);

  Var total = tape.scalar(0.0);
  for (const SegmentGroup& g : group_by_length(batch)) {
    Var z = encode_group(tape, enc, g);
    Var probs = classify(tape, clf, z);
    Var picked = ad::gather_rows_per_col(
        probs, lossdetail::true_phone_rows(g, inventory));
    Var logp = ad::log_(ad::clip(picked, cfg.prob_clip, 1.0 - cfg.prob_clip));
    total = ad::add(total, ad::scale(ad::sum_all(logp), -1.0));
  }
  return total;
}

// Uniformity loss for the style encoder: sum over segments and phones of the
// absolute deviation of the posterior from 1/N_w. Zero iff every posterior is
// exactly uniform. Classifier parameters stay fixed.
inline Var build_style_gen_loss(Tape& tape, Binder& binder,
                                ModelParams& params,
                                const SegmentBatch& batch,
                                const PhoneInventory& inventory,
                                bool train_encoder) {
  lossdetail::require_nonempty(batch, "style_adv_gen_loss");
  EncoderVars enc = bind_encoder(
      binder, params.group(plcsd_groups::style_encoder), train_encoder);
  ClassifierVars clf = bind_classifier(
      binder, params.group(plcsd_groups::style_classifier), false);

  double uniform = 1.0 / static_cast<double>(inventory.size());
  Var total = tape.scalar(0.0);
  for (const SegmentGroup& g : group_by_length(batch)) {
    Var z = encode_group(tape, enc, g);
    Var probs = classify(tape, clf, z);
    Var dev = ad::abs_(ad::add_scalar(probs, -uniform));
    total = ad::add(total, ad::sum_all(dev));
  }
  return total;
}

// Segment-discriminator BCE: natural segments should score 1, teacher-forced
// reconstructions 0. train_discriminator=false with train_generator=true
// gives the generator loss path below instead.
inline Var build_seg_dis_loss(Tape& tape, Binder& binder, ModelParams& params,
                              const SegmentBatch& batch, const PlcsdConfig& cfg,
                              bool train_discriminator) {
  lossdetail::require_nonempty(batch, "seg_adv_dis_loss");
  // reconstructions are constants for the discriminator update
  EncoderVars enc_c =
      bind_encoder(binder, params.group(plcsd_groups::content_encoder), false);
  EncoderVars enc_s =
      bind_encoder(binder, params.group(plcsd_groups::style_encoder), false);
  DecoderVars dec =
      bind_decoder(binder, params.group(plcsd_groups::decoder), false);
  DiscriminatorVars disc = bind_discriminator(
      binder, params.group(plcsd_groups::segment_discriminator),
      train_discriminator);

  Var total = tape.scalar(0.0);
  for (const SegmentGroup& g : group_by_length(batch)) {
    long B = static_cast<long>(g.segments.size());
    Var z_c = encode_group(tape, enc_c, g);
    Var z_s = encode_group(tape, enc_s, g);
    DecodedGroup fake = decode_group_teacher(tape, dec, z_c, z_s, g);
    std::vector<Var> real_frames;
    for (long t = 0; t < g.n_frames; ++t)
      real_frames.push_back(group_frame_constant(tape, g, t));
    Var p_real =
        discriminate_frames(tape, disc, real_frames, B, cfg.prob_clip);
    Var p_fake =
        discriminate_frames(tape, disc, fake.frames, B, cfg.prob_clip);
    Var real_term = ad::scale(ad::sum_all(ad::log_(p_real)), -1.0);
    Var one_minus_fake = ad::add_scalar(ad::scale(p_fake, -1.0), 1.0);
    Var fake_term = ad::scale(
        ad::sum_all(ad::log_(ad::clip(one_minus_fake, cfg.prob_clip,
                                      1.0 - cfg.prob_clip))),
        -1.0);
    total = ad::add(total, ad::add(real_term, fake_term));
  }
  return total;
}

// Generator side of the segment GAN: -log C_seg(reconstruction) with the
// discriminator frozen and gradients flowing into both encoders and the
// decoder through the reconstruction.
inline Var build_seg_gen_loss(Tape& tape, Binder& binder, ModelParams& params,
                              const SegmentBatch& batch, const PlcsdConfig& cfg,
                              bool train_generator) {
  lossdetail::require_nonempty(batch, "seg_adv_gen_loss");
  EncoderVars enc_c = bind_encoder(
      binder, params.group(plcsd_groups::content_encoder), train_generator);
  EncoderVars enc_s = bind_encoder(
      binder, params.group(plcsd_groups::style_encoder), train_generator);
  DecoderVars dec =
      bind_decoder(binder, params.group(plcsd_groups::decoder), train_generator);
  DiscriminatorVars disc = bind_discriminator(
      binder, params.group(plcsd_groups::segment_discriminator), false);

  Var total = tape.scalar(0.0);
  for (const SegmentGroup& g : group_by_length(batch)) {
    long B = static_cast<long>(g.segments.size());
    Var z_c = encode_group(tape, enc_c, g);
    Var z_s = encode_group(tape, enc_s, g);
    DecodedGroup fake = decode_group_teacher(tape, dec, z_c, z_s, g);
    Var p_fake =
        discriminate_frames(tape, disc, fake.frames, B, cfg.prob_clip);
    total = ad::add(total, ad::scale(ad::sum_all(ad::log_(p_fake)), -1.0));
  }
  return total;
}

// ---- value entry points (the spec's loss operations) ----

inline double auto_loss(const SegmentBatch& batch, ModelParams& params,
                        const PlcsdConfig& cfg) {
  Tape tape(false);
  Binder binder(tape);
  return tape.scalar_value(
      build_auto_loss(tape, binder, params, batch, cfg, false, false));
}

inline double content_class_loss(const SegmentBatch& batch, ModelParams& params,
                                 const PhoneInventory& inventory,
                                 const PlcsdConfig& cfg) {
  Tape tape(false);
  Binder binder(tape);
  return tape.scalar_value(build_content_class_loss(
      tape, binder, params, batch, inventory, cfg, false, false));
}

inline double contrast_loss(const SegmentBatch& batch, ModelParams& params) {
  Tape tape(false);
  Binder binder(tape);
  return tape.scalar_value(
      build_contrast_loss(tape, binder, params, batch, false));
}

inline double style_adv_dis_loss(const SegmentBatch& batch, ModelParams& params,
                                 const PhoneInventory& inventory,
                                 const PlcsdConfig& cfg) {
  Tape tape(false);
  Binder binder(tape);
  return tape.scalar_value(build_style_class_loss(
      tape, binder, params, batch, inventory, cfg, false, false));
}

inline double style_adv_gen_loss(const SegmentBatch& batch, ModelParams& params,
                                 const PhoneInventory& inventory) {
  Tape tape(false);
  Binder binder(tape);
  return tape.scalar_value(
      build_style_gen_loss(tape, binder, params, batch, inventory, false));
}

inline double seg_adv_dis_loss(const SegmentBatch& batch, ModelParams& params,
                               const PlcsdConfig& cfg) {
  Tape tape(false);
  Binder binder(tape);
  return tape.scalar_value(
      build_seg_dis_loss(tape, binder, params, batch, cfg, false));
}

inline double seg_adv_gen_loss(const SegmentBatch& batch, ModelParams& params,
                               const PlcsdConfig& cfg) {
  Tape tape(false);
  Binder binder(tape);
  return tape.scalar_value(
      build_seg_gen_loss(tape, binder, params, batch, cfg, false));
}

// ---- value-level seams for hand-derived oracle tests ----

// Spectrogram term of the auto loss from explicit predictions.
inline double auto_loss_spec_term(const Eigen::MatrixXf& predicted,
                                  const Eigen::MatrixXf& target) {
  if (predicted.rows() != target.rows() || predicted.cols() != target.cols())
    throw validation_error("auto_loss_spec_term: shape mismatch");
  double n = static_cast<double>(target.cols());
  double sse =
      (predicted.cast<double>() - target.cast<double>()).squaredNorm();
  return sse / n;
}

// Gate term of the auto loss from explicit per-frame probabilities.
inline double auto_loss_gate_term(const std::vector<double>& gate_probs,
                                  double prob_clip = 1e-7) {
  if (gate_probs.empty())
    throw validation_error("auto_loss_gate_term: no frames");
  double n = static_cast<double>(gate_probs.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < gate_probs.size(); ++t) {
    double p = std::clamp(gate_probs[t], prob_clip, 1.0 - prob_clip);
    bool final_frame = (t + 1 == gate_probs.size());
    acc += final_frame ? -std::log(p) : -std::log(1.0 - p);
  }
  return acc / n;
}

inline double cross_entropy_from_posterior(const Eigen::VectorXd& probs,
                                           int true_index,
                                           double prob_clip = 1e-7) {
  double p = std::clamp(probs(true_index), prob_clip, 1.0 - prob_clip);
  return -std::log(p);
}

inline double uniform_deviation_from_posterior(const Eigen::VectorXd& probs) {
  double uniform = 1.0 / static_cast<double>(probs.size());
  return (probs.array() - uniform).abs().sum();
}

inline double contrast_from_embeddings(
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& items) {
  double total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t j = i + 1; j < items.size(); ++j)
      if (items[i].first == items[j].first)
        total += (items[i].second - items[j].second).norm();
  return total;
}

inline double discriminator_bce(double p_real, double p_fake,
                                double prob_clip = 1e-7) {
  double pr = std::clamp(p_real, prob_clip, 1.0 - prob_clip);
  double pf = std::clamp(p_fake, prob_clip, 1.0 - prob_clip);
  return -std::log(pr) - std::log(1.0 - pf);
}

inline double generator_bce(double p_fake, double prob_clip = 1e-7) {
  double pf = std::clamp(p_fake, prob_clip, 1.0 - prob_clip);
  return -std::log(pf);
}

}  // namespace csd
