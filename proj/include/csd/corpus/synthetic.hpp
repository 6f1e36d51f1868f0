#pragma once

// Factorized synthetic corpus for desk-scale verification.
//
// Every segment mel is (phone spectral template) + (style contour over the
// segment's frames, added equally to all bands) + seeded Gaussian noise:
//
//   mel[t][b] = template[phone][b] + contour(style, t/(n-1)) + noise
//   contour(s, x) = amplitude * cos(pi * (s+1) * x)
//
// With noise disabled both factors are exactly recoverable by generative-model
// matching, which the brute-force classifiers below implement. Hidden style
// labels are returned for evaluation only.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "csd/common.hpp"
#include "csd/corpus/types.hpp"

namespace csd {

struct SyntheticConfig {
  int n_phones = 5;
  int n_styles = 3;
  long n_mels = 16;
  long min_frames = 6;
  long max_frames = 12;
  double template_sd = 1.0;
  double contour_amplitude = 1.5;
  double noise_sd = 0.05;  // 0 disables noise
  double frame_shift = 256.0 / 22050.0;
  double sample_rate = 22050.0;

  void validate() const {
    if (n_phones < 2) throw validation_error("SyntheticConfig: n_phones >= 2");
    if (n_styles < 2) throw validation_error("SyntheticConfig: n_styles >= 2");
    if (n_mels < 1 || min_frames < 1 || max_frames < min_frames)
      throw validation_error("SyntheticConfig: bad shape parameters");
  }
};

// Normalized in-segment position of frame t among n frames.
inline double segment_position(long t, long n) {
  if (n <= 1) return 0.5;
  return static_cast<double>(t) / static_cast<double>(n - 1);
}

inline double style_contour(const SyntheticConfig& cfg, int style, double x) {
  const double pi = 3.14159265358979323846;
  return cfg.contour_amplitude * std::cos(pi * static_cast<double>(style + 1) * x);
}

// Phone templates are a pure function of (config, seed).
inline Eigen::MatrixXd synthetic_templates(const SyntheticConfig& cfg,
                                           std::uint64_t seed) {
  Rng rng = Rng(seed).fork("templates");
  Eigen::MatrixXd templates(cfg.n_mels, cfg.n_phones);
  for (int p = 0; p < cfg.n_phones; ++p)
    for (long b = 0; b < cfg.n_mels; ++b)
      templates(b, p) = cfg.template_sd * rng.normal();
  return templates;
}

inline MelSpectrogram render_synthetic_segment(const SyntheticConfig& cfg,
                                               const Eigen::MatrixXd& templates,
                                               int phone, int style,
                                               long n_frames, Rng* noise_rng) {
  MelSpectrogram mel;
  mel.data.resize(cfg.n_mels, n_frames);
  mel.frame_shift = cfg.frame_shift;
  mel.frame_length = cfg.frame_shift;
  mel.sample_rate = cfg.sample_rate;
  for (long t = 0; t < n_frames; ++t) {
    double g = style_contour(cfg, style, segment_position(t, n_frames));
    for (long b = 0; b < cfg.n_mels; ++b) {
      double v = templates(b, phone) + g;
      if (noise_rng != nullptr && cfg.noise_sd > 0.0)
        v += cfg.noise_sd * noise_rng->normal();
      mel.data(b, t) = static_cast<float>(v);
    }
  }
  return mel;
}

struct SyntheticCorpus {
  SyntheticConfig config;
  PhoneInventory inventory;
  Eigen::MatrixXd templates;  // n_mels x n_phones
  std::vector<PhoneSegment> segments;
  std::vector<int> styles;  // hidden; evaluation only, never used in training
};

inline SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& cfg,
                                             long n_segments,
                                             std::uint64_t seed) {
  cfg.validate();
  if (n_segments < 1)
    throw validation_error("make_synthetic_corpus: n_segments >= 1");
  SyntheticCorpus corpus;
  corpus.config = cfg;
  corpus.inventory = PhoneInventory::synthetic(cfg.n_phones);
  corpus.templates = synthetic_templates(cfg, seed);
  Rng draw = Rng(seed).fork("segments");
  Rng noise = Rng(seed).fork("noise");
  corpus.segments.reserve(static_cast<std::size_t>(n_segments));
  corpus.styles.reserve(static_cast<std::size_t>(n_segments));
  for (long i = 0; i < n_segments; ++i) {
    int phone = static_cast<int>(draw.uniform_index(
        static_cast<std::uint64_t>(cfg.n_phones)));
    int style = static_cast<int>(draw.uniform_index(
        static_cast<std::uint64_t>(cfg.n_styles)));
    long frames = cfg.min_frames +
                  static_cast<long>(draw.uniform_index(static_cast<std::uint64_t>(
                      cfg.max_frames - cfg.min_frames + 1)));
    PhoneSegment seg;
    seg.utterance_id = "syn-" + std::to_string(i);
    seg.index_in_utterance = 0;
    seg.phone = corpus.inventory.label(phone);
    seg.first_frame = 0;
    seg.mel = render_synthetic_segment(cfg, corpus.templates, phone, style,
                                       frames, cfg.noise_sd > 0 ? &noise : nullptr);
    corpus.segments.push_back(std::move(seg));
    corpus.styles.push_back(style);
  }
  return corpus;
}

// Brute-force generative-model matching: the phone (and jointly the style)
// minimizing squared error against a noise-free render.
inline int classify_phone_by_template(const SyntheticConfig& cfg,
                                      const Eigen::MatrixXd& templates,
                                      const Eigen::MatrixXf& mel) {
  long n = mel.cols();
  double best = std::numeric_limits<double>::infinity();
  int best_phone = 0;
  for (int p = 0; p < cfg.n_phones; ++p) {
    for (int s = 0; s < cfg.n_styles; ++s) {
      double sse = 0.0;
      for (long t = 0; t < n; ++t) {
        double g = style_contour(cfg, s, segment_position(t, n));
        for (long b = 0; b < cfg.n_mels; ++b) {
          double d = static_cast<double>(mel(b, t)) - templates(b, p) - g;
          sse += d * d;
        }
      }
      if (sse < best) {
        best = sse;
        best_phone = p;
      }
    }
  }
  return best_phone;
}

// Style recovery from the band-mean trajectory with its time mean removed,
// which cancels the phone template. Works on decoded output as well as on
// generated segments.
inline int classify_style_by_contour(const SyntheticConfig& cfg,
                                     const Eigen::MatrixXf& mel) {
  long n = mel.cols();
  if (n < 1) throw validation_error("classify_style_by_contour: empty mel");
  std::vector<double> y(static_cast<std::size_t>(n));
  double y_mean = 0.0;
  for (long t = 0; t < n; ++t) {
    y[static_cast<std::size_t>(t)] =
        static_cast<double>(mel.col(t).mean());
    y_mean += y[static_cast<std::size_t>(t)];
  }
  y_mean /= static_cast<double>(n);
  double best = std::numeric_limits<double>::infinity();
  int best_style = 0;
  for (int s = 0; s < cfg.n_styles; ++s) {
    double g_mean = 0.0;
    for (long t = 0; t < n; ++t)
      g_mean += style_contour(cfg, s, segment_position(t, n));
    g_mean /= static_cast<double>(n);
    double sse = 0.0;
    for (long t = 0; t < n; ++t) {
      double g = style_contour(cfg, s, segment_position(t, n)) - g_mean;
      double d = (y[static_cast<std::size_t>(t)] - y_mean) - g;
      sse += d * d;
    }
    if (sse < best) {
      best = sse;
      best_style = s;
    }
  }
  return best_style;
}

// Synthetic utterances: fixed-length segments concatenated with contiguous
// alignments. style_per_utterance=true draws one style for the whole
// utterance, otherwise one per segment.
struct SyntheticUtterances {
  SyntheticConfig config;
  PhoneInventory inventory;
  Eigen::MatrixXd templates;
  std::vector<Utterance> utterances;
  std::vector<std::vector<int>> styles;  // hidden, per utterance per segment
  long frames_per_segment = 0;
};

inline SyntheticUtterances make_synthetic_utterances(
    const SyntheticConfig& cfg, long n_utterances, long phones_per_utterance,
    long frames_per_segment, bool style_per_utterance, std::uint64_t seed) {
  cfg.validate();
  if (n_utterances < 1 || phones_per_utterance < 1 || frames_per_segment < 1)
    throw validation_error("make_synthetic_utterances: bad shape arguments");
  SyntheticUtterances out;
  out.config = cfg;
  out.inventory = PhoneInventory::synthetic(cfg.n_phones);
  out.templates = synthetic_templates(cfg, seed);
  out.frames_per_segment = frames_per_segment;
  Rng draw = Rng(seed).fork("utterances");
  Rng noise = Rng(seed).fork("utt-noise");
  for (long u = 0; u < n_utterances; ++u) {
    Utterance utt;
    utt.id = "synutt-" + std::to_string(u);
    utt.mel.frame_shift = cfg.frame_shift;
    utt.mel.frame_length = cfg.frame_shift;
    utt.mel.sample_rate = cfg.sample_rate;
    utt.mel.data.resize(cfg.n_mels, phones_per_utterance * frames_per_segment);
    std::vector<int> utt_styles;
    int shared_style = static_cast<int>(
        draw.uniform_index(static_cast<std::uint64_t>(cfg.n_styles)));
    for (long k = 0; k < phones_per_utterance; ++k) {
      int phone = static_cast<int>(
          draw.uniform_index(static_cast<std::uint64_t>(cfg.n_phones)));
      int style = style_per_utterance
                      ? shared_style
                      : static_cast<int>(draw.uniform_index(
                            static_cast<std::uint64_t>(cfg.n_styles)));
      MelSpectrogram seg = render_synthetic_segment(
          cfg, out.templates, phone, style, frames_per_segment,
          cfg.noise_sd > 0 ? &noise : nullptr);
      utt.mel.data.middleCols(k * frames_per_segment, frames_per_segment) =
          seg.data;
      utt.phone_sequence.push_back(out.inventory.label(phone));
      AlignmentEntry entry;
      entry.label = out.inventory.label(phone);
      entry.start = static_cast<double>(k * frames_per_segment) * cfg.frame_shift;
      entry.end =
          static_cast<double>((k + 1) * frames_per_segment) * cfg.frame_shift;
      utt.alignment.push_back(entry);
      utt_styles.push_back(style);
    }
    out.utterances.push_back(std::move(utt));
    out.styles.push_back(std::move(utt_styles));
  }
  return out;
}

}  // namespace csd
