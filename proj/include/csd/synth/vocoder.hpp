#pragma once

// Griffin-Lim phase reconstruction from log-mel spectrograms.
//
// The log-mel frame is inverted to a linear magnitude spectrum through a
// Tikhonov-regularized pseudo-inverse of the mel filterbank, then the phase
// is recovered by fixed-count Griffin-Lim iterations starting from zero
// phase. Deterministic for a fixed iteration count.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "csd/common.hpp"
#include "csd/corpus/mel.hpp"
#include "csd/corpus/types.hpp"
#include "csd/dsp.hpp"

namespace csd {

struct VocoderConfig {
  long griffin_lim_iters = 60;
  double pinv_regularizer = 1e-8;

  void validate() const {
    if (griffin_lim_iters < 0)
      throw validation_error("VocoderConfig: iterations must be >= 0");
    if (pinv_regularizer <= 0)
      throw validation_error("VocoderConfig: regularizer must be positive");
  }
};

// Regularized pseudo-inverse of the (n_mels x n_bins) filterbank:
// FB^T (FB FB^T + lambda I)^{-1}, applied to mel power vectors.
inline Eigen::MatrixXd mel_pseudo_inverse(const Eigen::MatrixXd& fb,
                                          double regularizer) {
  Eigen::MatrixXd gram = fb * fb.transpose();
  gram.diagonal().array() += regularizer;
  return fb.transpose() * gram.ldlt().solve(
      Eigen::MatrixXd::Identity(fb.rows(), fb.rows()));
}

inline std::vector<double> vocode(const MelSpectrogram& mel,
                                  const MelConfig& mel_cfg,
                                  const VocoderConfig& cfg) {
  cfg.validate();
  mel_cfg.validate();
  if (mel.n_frames() == 0) throw validation_error("vocode: empty mel");
  if (mel.n_mels() != mel_cfg.n_mels)
    throw validation_error("vocode: mel band count does not match config");

  std::size_t n_fft = dsp::next_pow2(static_cast<std::size_t>(mel_cfg.frame_length));
  long n_bins = static_cast<long>(n_fft / 2 + 1);
  Eigen::MatrixXd fb = mel_filterbank(mel_cfg, static_cast<long>(n_fft));
  Eigen::MatrixXd pinv = mel_pseudo_inverse(fb, cfg.pinv_regularizer);

  // log-mel -> mel power -> linear power -> magnitude
  std::vector<Eigen::VectorXd> magnitudes;
  magnitudes.reserve(static_cast<std::size_t>(mel.n_frames()));
  for (long t = 0; t < mel.n_frames(); ++t) {
    Eigen::VectorXd mel_power =
        mel.data.col(t).cast<double>().array().exp().matrix();
    // subtract the log floor so silence maps to zero energy; the extra
    // relative threshold absorbs f32 rounding of floor-valued cells
    mel_power.array() -= mel_cfg.log_floor;
    double residue = mel_cfg.log_floor * 1e-4;
    mel_power = (mel_power.array() < residue).select(0.0, mel_power);
    Eigen::VectorXd lin_power = (pinv * mel_power).cwiseMax(0.0);
    magnitudes.push_back(lin_power.array().sqrt().matrix());
  }

  std::size_t frame_length = static_cast<std::size_t>(mel_cfg.frame_length);
  std::size_t hop = static_cast<std::size_t>(mel_cfg.hop_length);

  // zero-phase initial spectrogram
  std::vector<std::vector<dsp::cplx>> spec(
      static_cast<std::size_t>(mel.n_frames()));
  for (std::size_t t = 0; t < spec.size(); ++t) {
    spec[t].resize(static_cast<std::size_t>(n_bins));
    for (long k = 0; k < n_bins; ++k)
      spec[t][static_cast<std::size_t>(k)] = dsp::cplx(magnitudes[t](k), 0.0);
  }

  std::vector<double> audio = dsp::istft(spec, frame_length, hop, n_fft);
  for (long it = 0; it < cfg.griffin_lim_iters; ++it) {
    auto est = dsp::stft(audio, frame_length, hop, n_fft);
    // keep the estimated phase, restore the target magnitude
    for (std::size_t t = 0; t < spec.size() && t < est.size(); ++t) {
      for (long k = 0; k < n_bins; ++k) {
        dsp::cplx e = est[t][static_cast<std::size_t>(k)];
        double a = std::abs(e);
        dsp::cplx phase = a > 1e-12 ? e / a : dsp::cplx(1.0, 0.0);
        spec[t][static_cast<std::size_t>(k)] =
            magnitudes[t](k) * phase;
      }
    }
    audio = dsp::istft(spec, frame_length, hop, n_fft);
  }

  // trim to frames * hop samples
  std::size_t target = static_cast<std::size_t>(mel.n_frames()) * hop;
  if (audio.size() > target) audio.resize(target);
  return audio;
}

}  // namespace csd
