#pragma once

// Small self-contained DSP kernel: iterative radix-2 FFT, Hann window,
// STFT/ISTFT. Shared by mel extraction, pitch analysis and the vocoder.

#include <complex>
#include <cstddef>
#include <vector>

#include "csd/common.hpp"

namespace csd {
namespace dsp {

using cplx = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 Cooley-Tukey. inverse=true applies conjugate
// transform and 1/N scaling.
inline void fft(std::vector<cplx>& a, bool inverse = false) {
  const std::size_t n = a.size();
  if (!is_pow2(n)) throw numeric_error("fft: size must be a power of two");
  // bit reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double pi = 3.14159265358979323846;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    cplx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        cplx u = a[i + k];
        cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  const double pi = 3.14159265358979323846;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) /
                                static_cast<double>(n));
  return w;
}

// Frame count with no centre padding: audio shorter than one window is an
// error for the callers that use this.
inline long frame_count(std::size_t n_samples, std::size_t frame_length,
                        std::size_t hop) {
  if (n_samples < frame_length) return 0;
  return static_cast<long>((n_samples - frame_length) / hop) + 1;
}

// Magnitude-and-phase STFT. Rows of the result are frames; each frame holds
// n_fft/2 + 1 complex bins.
inline std::vector<std::vector<cplx>> stft(const std::vector<double>& audio,
                                           std::size_t frame_length,
                                           std::size_t hop,
                                           std::size_t n_fft) {
  if (!is_pow2(n_fft)) throw numeric_error("stft: n_fft must be a power of two");
  long frames = frame_count(audio.size(), frame_length, hop);
  if (frames <= 0) throw validation_error("stft: audio shorter than one frame");
  std::vector<double> window = hann_window(frame_length);
  std::vector<std::vector<cplx>> out(static_cast<std::size_t>(frames));
  std::vector<cplx> buf(n_fft);
  for (long f = 0; f < frames; ++f) {
    std::size_t off = static_cast<std::size_t>(f) * hop;
    for (std::size_t i = 0; i < n_fft; ++i) {
      double s = (i < frame_length) ? audio[off + i] * window[i] : 0.0;
      buf[i] = cplx(s, 0.0);
    }
    fft(buf);
    out[static_cast<std::size_t>(f)].assign(buf.begin(),
                                            buf.begin() +
                                                static_cast<long>(n_fft / 2 + 1));
  }
  return out;
}

// Overlap-add inverse STFT with squared-window normalization.
inline std::vector<double> istft(const std::vector<std::vector<cplx>>& frames,
                                 std::size_t frame_length, std::size_t hop,
                                 std::size_t n_fft) {
  if (frames.empty()) throw validation_error("istft: no frames");
  std::size_t n_bins = n_fft / 2 + 1;
  std::size_t n_samples = (frames.size() - 1) * hop + frame_length;
  std::vector<double> audio(n_samples, 0.0);
  std::vector<double> norm(n_samples, 0.0);
  std::vector<double> window = hann_window(frame_length);
  std::vector<cplx> buf(n_fft);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].size() != n_bins)
      throw numeric_error("istft: bin count mismatch");
    for (std::size_t k = 0; k < n_bins; ++k) buf[k] = frames[f][k];
    for (std::size_t k = n_bins; k < n_fft; ++k)
      buf[k] = std::conj(buf[n_fft - k]);
    fft(buf, true);
    std::size_t off = f * hop;
    for (std::size_t i = 0; i < frame_length; ++i) {
      audio[off + i] += buf[i].real() * window[i];
      norm[off + i] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < n_samples; ++i)
    if (norm[i] > 1e-9) audio[i] /= norm[i];
  return audio;
}

}  // namespace dsp
}  // namespace csd
