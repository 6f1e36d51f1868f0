#pragma once

// Log-mel spectrogram extraction. Frames are windowed with a periodic Hann
// window, no centre padding, power spectrum weighted by a triangular
// filterbank on the HTK mel scale (2595*log10(1 + f/700)), natural-log
// compressed with a configurable floor.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "csd/common.hpp"
#include "csd/corpus/types.hpp"
#include "csd/dsp.hpp"

namespace csd {

struct MelConfig {
  double sample_rate = 22050.0;
  long frame_length = 1024;  // samples
  long hop_length = 256;     // samples
  long n_mels = 80;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 -> sample_rate / 2
  double log_floor = 1e-5;

  double effective_f_max() const {
    return f_max > 0.0 ? f_max : sample_rate / 2.0;
  }

  void validate() const {
    if (sample_rate <= 0 || frame_length <= 0 || hop_length <= 0 || n_mels <= 0)
      throw validation_error("MelConfig: all sizes must be positive");
    if (log_floor <= 0)
      throw validation_error("MelConfig: log_floor must be positive");
    if (f_min < 0 || effective_f_max() <= f_min)
      throw validation_error("MelConfig: invalid frequency range");
  }
};

inline double hz_to_mel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangular filterbank, peak 1, over the n_fft/2+1 power-spectrum bins.
inline Eigen::MatrixXd mel_filterbank(const MelConfig& cfg, long n_fft) {
  long n_bins = n_fft / 2 + 1;
  double mel_lo = hz_to_mel(cfg.f_min);
  double mel_hi = hz_to_mel(cfg.effective_f_max());
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t m = 0; m < edges.size(); ++m)
    edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) /
                                      static_cast<double>(cfg.n_mels + 1));
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, n_bins);
  double bin_hz = cfg.sample_rate / static_cast<double>(n_fft);
  for (long m = 0; m < cfg.n_mels; ++m) {
    double lo = edges[static_cast<std::size_t>(m)];
    double mid = edges[static_cast<std::size_t>(m) + 1];
    double hi = edges[static_cast<std::size_t>(m) + 2];
    for (long k = 0; k < n_bins; ++k) {
      double f = bin_hz * static_cast<double>(k);
      if (f > lo && f < mid)
        fb(m, k) = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        fb(m, k) = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

// Centre frequencies of the mel bands (the triangle peaks).
inline std::vector<double> mel_band_centers(const MelConfig& cfg) {
  double mel_lo = hz_to_mel(cfg.f_min);
  double mel_hi = hz_to_mel(cfg.effective_f_max());
  std::vector<double> centers(static_cast<std::size_t>(cfg.n_mels));
  for (long m = 0; m < cfg.n_mels; ++m)
    centers[static_cast<std::size_t>(m)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m + 1) /
                               static_cast<double>(cfg.n_mels + 1));
  return centers;
}

// frames = floor((n_samples - frame_length) / hop) + 1, no centre padding.
inline MelSpectrogram compute_mel(const std::vector<double>& audio,
                                  double sample_rate, const MelConfig& cfg) {
  cfg.validate();
  if (audio.empty()) throw validation_error("compute_mel: empty audio");
  if (sample_rate != cfg.sample_rate)
    throw validation_error("compute_mel: sample rate mismatch (audio " +
                           std::to_string(sample_rate) + " Hz, config " +
                           std::to_string(cfg.sample_rate) + " Hz)");
  if (static_cast<long>(audio.size()) < cfg.frame_length)
    throw validation_error("compute_mel: audio shorter than one frame");

  std::size_t n_fft = dsp::next_pow2(static_cast<std::size_t>(cfg.frame_length));
  auto spec = dsp::stft(audio, static_cast<std::size_t>(cfg.frame_length),
                        static_cast<std::size_t>(cfg.hop_length), n_fft);
  Eigen::MatrixXd fb = mel_filterbank(cfg, static_cast<long>(n_fft));

  long n_frames = static_cast<long>(spec.size());
  long n_bins = static_cast<long>(n_fft / 2 + 1);
  MelSpectrogram out;
  out.data.resize(cfg.n_mels, n_frames);
  out.frame_shift = static_cast<double>(cfg.hop_length) / cfg.sample_rate;
  out.frame_length = static_cast<double>(cfg.frame_length) / cfg.sample_rate;
  out.sample_rate = cfg.sample_rate;

  Eigen::VectorXd power(n_bins);
  for (long f = 0; f < n_frames; ++f) {
    const auto& bins = spec[static_cast<std::size_t>(f)];
    for (long k = 0; k < n_bins; ++k)
      power(k) = std::norm(bins[static_cast<std::size_t>(k)]);
    Eigen::VectorXd mel = fb * power;
    for (long m = 0; m < cfg.n_mels; ++m)
      out.data(m, f) = static_cast<float>(
          std::log(std::max(mel(m), cfg.log_floor)));
  }
  if (!out.all_finite())
    throw numeric_error("compute_mel: non-finite mel values");
  return out;
}

}  // namespace csd
