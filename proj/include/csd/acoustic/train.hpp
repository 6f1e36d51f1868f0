#pragma once

// Utterance-level training: jointly optimizes the text encoder and the
// acoustic model against ground-truth mel-spectrograms with the
// disentanglement module frozen, then builds (text sequence, style sequence)
// pairs and trains the style predictor on them.

#include <functional>
#include <string>
#include <vector>

#include "csd/acoustic/model.hpp"
#include "csd/acoustic/predictor.hpp"
#include "csd/corpus/segment.hpp"
#include "csd/corpus/types.hpp"
#include "csd/plcsd/model.hpp"

namespace csd {

// Per-phone style embeddings of an utterance through the frozen style
// encoder, one per non-silence segment.
inline StyleEmbeddingSequence utterance_style_sequence(
    const Utterance& utt, ModelParams& plcsd_params,
    const SilenceLabels& silence = SilenceLabels{}) {
  StyleEmbeddingSequence seq;
  for (const PhoneSegment& seg : segment_utterance(utt, silence))
    seq.push_back(encode_style(seg, plcsd_params).values);
  return seq;
}

struct UtteranceTrainReport {
  long epochs_run = 0;
  long skipped_utterances = 0;
  std::vector<double> epoch_mse;  // teacher-forced MSE per frame per band
};

// MSE (per frame per band) + weighted gate BCE for one utterance, teacher
// forced. Returns the scalar loss Var; mse_out receives the plain MSE value.
inline Var build_utterance_loss(Tape& tape, Binder& binder,
                                ParamGroup& text_group, ParamGroup& am_group,
                                const AcousticConfig& cfg,
                                const PhoneInventory& inventory,
                                const Utterance& utt,
                                const StyleEmbeddingSequence& style_seq,
                                bool trainable, double* mse_out = nullptr) {
  using namespace ad;
  Var text = encode_text_var(tape, binder, text_group, utt.phone_sequence,
                             inventory, trainable);
  // combined memory: [text; style] per phone, style fixed
  Mat style(cfg.d_s, static_cast<long>(style_seq.size()));
  for (std::size_t k = 0; k < style_seq.size(); ++k)
    style.col(static_cast<long>(k)) = style_seq[k];
  if (style.cols() != tape.value(text).cols())
    throw validation_error("build_utterance_loss: style/text length mismatch");
  Var combined = concat_vert(text, tape.constant(std::move(style)));

  AcousticVars am = bind_acoustic(binder, am_group, trainable);
  Var keys = linear(am.mem, combined);
  long m = static_cast<long>(utt.phone_sequence.size());
  AcousticDecodeState state = acoustic_init_state(tape, cfg, m);

  long n_mels = utt.mel.n_mels();
  long frames = utt.mel.n_frames();
  Var sse = tape.scalar(0.0);
  Var gate = tape.scalar(0.0);
  Mat prev = Mat::Zero(n_mels, 1);
  for (long t = 0; t < frames; ++t) {
    AcousticStepOutput out = acoustic_step(tape, am, cfg, combined, keys,
                                           tape.constant(prev), state);
    Var target = tape.constant(utt.mel.data.col(t).cast<double>().eval());
    sse = add(sse, sum_all(square(sub(out.frame, target))));
    Var p = clip(sigmoid(out.gate_logit), cfg.prob_clip, 1.0 - cfg.prob_clip);
    Var bce = (t == frames - 1)
                  ? scale(sum_all(log_(p)), -1.0)
                  : scale(sum_all(log_(add_scalar(scale(p, -1.0), 1.0))), -1.0);
    gate = add(gate, bce);
    prev = utt.mel.data.col(t).cast<double>();
  }
  double inv = 1.0 / static_cast<double>(frames * n_mels);
  Var mse = scale(sse, inv);
  if (mse_out != nullptr) *mse_out = tape.scalar_value(mse);
  Var gate_term = scale(gate, cfg.gate_weight / static_cast<double>(frames));
  return add(mse, gate_term);
}

// Joint optimization of text encoder + acoustic model. The disentanglement
// parameters are only read (style sequences are precomputed once up front).
inline UtteranceTrainReport train_utterance_level(
    const std::vector<Utterance>& utterances, ModelParams& plcsd_params,
    ModelParams& acoustic_params, const AcousticConfig& cfg,
    const PhoneInventory& inventory,
    const SilenceLabels& silence = SilenceLabels{},
    const std::function<void(long, double)>& on_epoch = nullptr) {
  cfg.validate();
  if (utterances.empty())
    throw validation_error("train_utterance_level: no utterances");

  ParamGroup& text_group = acoustic_params.group(acoustic_groups::text_encoder);
  ParamGroup& am_group = acoustic_params.group(acoustic_groups::acoustic_model);

  UtteranceTrainReport report;
  std::vector<const Utterance*> usable;
  std::vector<StyleEmbeddingSequence> styles;
  for (const Utterance& utt : utterances) {
    try {
      styles.push_back(utterance_style_sequence(utt, plcsd_params, silence));
      usable.push_back(&utt);
    } catch (const validation_error&) {
      ++report.skipped_utterances;
    }
  }
  if (usable.empty())
    throw validation_error(
        "train_utterance_level: every utterance failed segmentation");

  Adam opt(cfg.lr);
  std::vector<ParamTensor*> tensors = tensors_of(text_group);
  for (auto* t : tensors_of(am_group)) tensors.push_back(t);

  for (long epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng order_rng = Rng(cfg.seed).fork("acoustic-epoch-" + std::to_string(epoch));
    std::vector<std::size_t> order(usable.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);

    double mse_sum = 0.0;
    for (std::size_t i : order) {
      Tape tape;
      Binder binder(tape);
      double mse = 0.0;
      Var loss = build_utterance_loss(tape, binder, text_group, am_group, cfg,
                                      inventory, *usable[i], styles[i], true,
                                      &mse);
      text_group.zero_grads();
      am_group.zero_grads();
      tape.backward(loss);
      binder.scatter_grads();
      opt.step(tensors);
      mse_sum += mse;
    }
    double epoch_mse = mse_sum / static_cast<double>(usable.size());
    report.epoch_mse.push_back(epoch_mse);
    report.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, epoch_mse);
    if (!text_group.all_finite() || !am_group.all_finite())
      throw numeric_error("train_utterance_level: non-finite parameters");
  }
  return report;
}

// ---- style predictor training ----

struct PredictorPair {
  TextSequence input;
  StyleEmbeddingSequence target;
};

// One pair per utterance; both sequences have the utterance's phone count.
inline std::vector<PredictorPair> build_predictor_pairs(
    const std::vector<Utterance>& utterances, ModelParams& acoustic_params,
    ModelParams& plcsd_params, const PhoneInventory& inventory,
    const SilenceLabels& silence = SilenceLabels{}) {
  if (utterances.empty())
    throw validation_error("build_predictor_pairs: no utterances");
  const ParamGroup& text_group =
      acoustic_params.group(acoustic_groups::text_encoder);
  std::vector<PredictorPair> pairs;
  pairs.reserve(utterances.size());
  for (const Utterance& utt : utterances) {
    PredictorPair pair;
    pair.input = encode_text(utt.phone_sequence, text_group, inventory);
    pair.target = utterance_style_sequence(utt, plcsd_params, silence);
    if (pair.input.size() != pair.target.size())
      throw validation_error("build_predictor_pairs: length mismatch for " +
                             utt.id);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

struct PredictorTrainReport {
  long epochs_run = 0;
  std::vector<double> epoch_mse;  // standardized-target MSE
};

// MSE on per-dimension standardized targets; statistics land in the stats
// group and are stored with the checkpoint.
inline PredictorTrainReport train_style_predictor(
    const std::vector<PredictorPair>& pairs, ModelParams& predictor_params,
    const PredictorConfig& cfg,
    const std::function<void(long, double)>& on_epoch = nullptr) {
  cfg.validate();
  if (pairs.empty())
    throw validation_error("train_style_predictor: empty pair list");
  ParamGroup& sp = predictor_params.group(acoustic_groups::style_predictor);
  ParamGroup& stats = predictor_params.group(acoustic_groups::predictor_stats);

  // standardization statistics over all target vectors
  Mat mean = Mat::Zero(cfg.d_s, 1);
  long count = 0;
  for (const auto& pair : pairs)
    for (const auto& v : pair.target) {
      mean.col(0) += v;
      ++count;
    }
  mean /= static_cast<double>(count);
  Mat var = Mat::Zero(cfg.d_s, 1);
  for (const auto& pair : pairs)
    for (const auto& v : pair.target)
      var.col(0) += (v - mean.col(0)).array().square().matrix();
  var /= static_cast<double>(count);
  Mat sd = (var.array() + 1e-8).sqrt().matrix();
  stats.tensor("mean").value = mean;
  stats.tensor("sd").value = sd;

  Adam opt(cfg.lr);
  std::vector<ParamTensor*> tensors = tensors_of(sp);
  PredictorTrainReport report;
  for (long epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng order_rng = Rng(cfg.seed).fork("predictor-epoch-" + std::to_string(epoch));
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);

    double mse_sum = 0.0;
    for (std::size_t i : order) {
      const PredictorPair& pair = pairs[i];
      Tape tape;
      Binder binder(tape);
      Mat x(cfg.d_t, static_cast<long>(pair.input.size()));
      Mat y(cfg.d_s, static_cast<long>(pair.target.size()));
      for (std::size_t k = 0; k < pair.input.size(); ++k) {
        x.col(static_cast<long>(k)) = pair.input[k];
        y.col(static_cast<long>(k)) =
            ((pair.target[k] - mean.col(0)).array() / sd.col(0).array())
                .matrix();
      }
      Var pred = predictor_forward(tape, binder, sp, cfg,
                                   tape.constant(std::move(x)), true);
      Var loss = ad::mean_all(ad::square(ad::sub(
          pred, tape.constant(std::move(y)))));
      sp.zero_grads();
      tape.backward(loss);
      binder.scatter_grads();
      opt.step(tensors);
      mse_sum += tape.scalar_value(loss);
    }
    report.epoch_mse.push_back(mse_sum / static_cast<double>(pairs.size()));
    report.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, report.epoch_mse.back());
    if (!sp.all_finite())
      throw numeric_error("train_style_predictor: non-finite parameters");
  }
  return report;
}

// Prediction routes phones through the frozen text encoder first, so
// predicting from phones and from a precomputed text sequence agree exactly.
inline StyleEmbeddingSequence predict_style(
    const std::vector<std::string>& phones, ModelParams& acoustic_params,
    ModelParams& predictor_params, const PredictorConfig& cfg,
    const PhoneInventory& inventory) {
  TextSequence text = encode_text(
      phones, acoustic_params.group(acoustic_groups::text_encoder), inventory);
  return predictor_apply(
      predictor_params.group(acoustic_groups::style_predictor),
      predictor_params.group(acoustic_groups::predictor_stats), cfg, text);
}

inline StyleEmbeddingSequence predict_style_from_text(
    const TextSequence& text, ModelParams& predictor_params,
    const PredictorConfig& cfg) {
  return predictor_apply(
      predictor_params.group(acoustic_groups::style_predictor),
      predictor_params.group(acoustic_groups::predictor_stats), cfg, text);
}

}  // namespace csd
