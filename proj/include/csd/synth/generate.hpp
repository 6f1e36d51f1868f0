#pragma once

// Generation modes: reconstruction, varying-content style transfer with
// style-sequence interpolation, and predictor-driven synthesis without
// reference audio. Transfer with reference == source is bitwise identical to
// reconstruction (same code path).

#include <string>
#include <vector>

#include "csd/acoustic/model.hpp"
#include "csd/acoustic/train.hpp"
#include "csd/common.hpp"
#include "csd/corpus/types.hpp"
#include "csd/synth/interpolate.hpp"

namespace csd {

enum class GenerationMode { reconstruct, transfer, tts };

struct GenerationRequest {
  GenerationMode mode = GenerationMode::reconstruct;
  std::vector<std::string> source_phones;  // transfer/tts; empty -> reference's
  const Utterance* reference = nullptr;    // reconstruct/transfer

  void validate() const {
    if (mode != GenerationMode::tts && reference == nullptr)
      throw validation_error(
          "GenerationRequest: reconstruct/transfer need a reference utterance");
    if (mode == GenerationMode::tts && source_phones.empty())
      throw validation_error("GenerationRequest: tts needs source phones");
  }
};

// Everything generation needs, borrowed from the trained stages.
struct SynthesisContext {
  ModelParams* plcsd_params = nullptr;
  ModelParams* acoustic_params = nullptr;
  ModelParams* predictor_params = nullptr;  // only needed for tts
  AcousticConfig acoustic_cfg;
  PredictorConfig predictor_cfg;
  PhoneInventory inventory;
  SilenceLabels silence;
  double frame_shift = 256.0 / 22050.0;
};

struct GenerationResult {
  MelSpectrogram mel;
  std::vector<double> gates;
  bool truncated = false;
  StyleEmbeddingSequence style_sequence;  // the sequence that drove synthesis
};

inline GenerationResult transfer(const std::vector<std::string>& source_phones,
                                 const Utterance& reference,
                                 SynthesisContext& ctx) {
  if (source_phones.empty())
    throw validation_error("transfer: empty source phone sequence");
  for (const auto& p : source_phones)
    if (!ctx.inventory.contains(p))
      throw validation_error("transfer: unknown phone '" + p + "'");

  StyleEmbeddingSequence ref_style =
      utterance_style_sequence(reference, *ctx.plcsd_params, ctx.silence);
  StyleEmbeddingSequence style = interpolate_style_sequence(
      ref_style, static_cast<long>(source_phones.size()));
  TextSequence text = encode_text(
      source_phones,
      ctx.acoustic_params->group(acoustic_groups::text_encoder), ctx.inventory);
  CombinedSequence combined = combine(text, style);
  AcousticResult acoustic = acoustic_forward(
      combined, nullptr,
      ctx.acoustic_params->group(acoustic_groups::acoustic_model),
      ctx.acoustic_cfg, ctx.frame_shift);
  GenerationResult out;
  out.mel = std::move(acoustic.mel);
  out.gates = std::move(acoustic.gates);
  out.truncated = acoustic.truncated;
  out.style_sequence = std::move(style);
  return out;
}

inline GenerationResult reconstruct(const Utterance& utt,
                                    SynthesisContext& ctx) {
  return transfer(utt.phone_sequence, utt, ctx);
}

inline GenerationResult synthesize_tts(const std::vector<std::string>& phones,
                                       SynthesisContext& ctx) {
  if (phones.empty()) throw validation_error("synthesize_tts: empty phones");
  if (ctx.predictor_params == nullptr)
    throw prerequisite_error("synthesize_tts: no style predictor loaded");
  StyleEmbeddingSequence style =
      predict_style(phones, *ctx.acoustic_params, *ctx.predictor_params,
                    ctx.predictor_cfg, ctx.inventory);
  TextSequence text = encode_text(
      phones, ctx.acoustic_params->group(acoustic_groups::text_encoder),
      ctx.inventory);
  CombinedSequence combined = combine(text, style);
  AcousticResult acoustic = acoustic_forward(
      combined, nullptr,
      ctx.acoustic_params->group(acoustic_groups::acoustic_model),
      ctx.acoustic_cfg, ctx.frame_shift);
  GenerationResult out;
  out.mel = std::move(acoustic.mel);
  out.gates = std::move(acoustic.gates);
  out.truncated = acoustic.truncated;
  out.style_sequence = std::move(style);
  return out;
}

inline GenerationResult generate(const GenerationRequest& request,
                                 SynthesisContext& ctx) {
  request.validate();
  switch (request.mode) {
    case GenerationMode::reconstruct:
      return reconstruct(*request.reference, ctx);
    case GenerationMode::transfer: {
      const std::vector<std::string>& phones = request.source_phones.empty()
                                                   ? request.reference->phone_sequence
                                                   : request.source_phones;
      return transfer(phones, *request.reference, ctx);
    }
    case GenerationMode::tts:
      return synthesize_tts(request.source_phones, ctx);
  }
  throw validation_error("generate: unknown mode");
}

}  // namespace csd
