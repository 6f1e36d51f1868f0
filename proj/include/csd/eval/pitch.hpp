#pragma once

// Time-domain pitch extraction: per-frame normalized autocorrelation with
// parabolic peak interpolation, voicing by periodicity strength plus an
// energy gate.

#include <cmath>
#include <vector>

#include "csd/common.hpp"

namespace csd {

struct PitchConfig {
  double f_min = 60.0;
  double f_max = 400.0;
  long window = 1024;  // samples
  long hop = 256;      // samples
  double voicing_threshold = 0.5;  // normalized autocorrelation peak
  double silence_rms = 1e-4;

  void validate() const {
    if (f_min <= 0 || f_max <= f_min)
      throw validation_error("PitchConfig: need 0 < f_min < f_max");
    if (window <= 0 || hop <= 0)
      throw validation_error("PitchConfig: window and hop must be positive");
    if (!(voicing_threshold > 0 && voicing_threshold < 1))
      throw validation_error("PitchConfig: voicing_threshold in (0,1)");
  }
};

struct PitchTrack {
  std::vector<double> f0;   // Hz, 0 where unvoiced
  std::vector<bool> voiced;
  double frame_shift = 0.0;  // seconds

  std::size_t n_frames() const { return f0.size(); }

  void validate(double f_min = 0.0, double f_max = 0.0) const {
    if (f0.size() != voiced.size())
      throw validation_error("PitchTrack: f0/voiced length mismatch");
    for (std::size_t i = 0; i < f0.size(); ++i) {
      if (voiced[i] != (f0[i] > 0.0))
        throw validation_error("PitchTrack: f0 > 0 iff voiced violated");
      if (voiced[i] && f_min > 0.0 && (f0[i] < f_min || f0[i] > f_max))
        throw validation_error("PitchTrack: voiced f0 outside range");
    }
  }
};

inline PitchTrack extract_pitch(const std::vector<double>& audio,
                                double sample_rate, const PitchConfig& cfg) {
  cfg.validate();
  if (audio.empty()) throw validation_error("extract_pitch: empty audio");
  if (static_cast<long>(audio.size()) < cfg.window)
    throw validation_error("extract_pitch: audio shorter than one window");

  long lag_min = static_cast<long>(std::floor(sample_rate / cfg.f_max));
  long lag_max = static_cast<long>(std::ceil(sample_rate / cfg.f_min));
  lag_max = std::min(lag_max, cfg.window - 2);
  if (lag_min < 2 || lag_min >= lag_max)
    throw validation_error("extract_pitch: lag range collapsed; check window");

  long n_frames =
      (static_cast<long>(audio.size()) - cfg.window) / cfg.hop + 1;
  PitchTrack track;
  track.frame_shift = static_cast<double>(cfg.hop) / sample_rate;
  track.f0.resize(static_cast<std::size_t>(n_frames), 0.0);
  track.voiced.resize(static_cast<std::size_t>(n_frames), false);

  std::vector<double> r(static_cast<std::size_t>(lag_max) + 2, 0.0);
  for (long f = 0; f < n_frames; ++f) {
    const double* x = audio.data() + f * cfg.hop;
    double energy = 0.0;
    for (long t = 0; t < cfg.window; ++t) energy += x[t] * x[t];
    double rms = std::sqrt(energy / static_cast<double>(cfg.window));
    if (rms <= cfg.silence_rms) continue;

    // normalized cross-correlation over the overlapping region per lag
    for (long lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      double num = 0.0, e0 = 0.0, e1 = 0.0;
      long n = cfg.window - lag;
      for (long t = 0; t < n; ++t) {
        num += x[t] * x[t + lag];
        e0 += x[t] * x[t];
        e1 += x[t + lag] * x[t + lag];
      }
      double denom = std::sqrt(e0 * e1);
      r[static_cast<std::size_t>(lag)] = denom > 0.0 ? num / denom : 0.0;
    }

    long best_lag = 0;
    double best_val = -1.0;
    for (long lag = lag_min; lag <= lag_max; ++lag) {
      double v = r[static_cast<std::size_t>(lag)];
      if (v > best_val) {
        best_val = v;
        best_lag = lag;
      }
    }
    if (best_val < cfg.voicing_threshold) continue;

    // parabolic interpolation around the peak
    double lag_star = static_cast<double>(best_lag);
    if (best_lag > lag_min && best_lag < lag_max) {
      double ym = r[static_cast<std::size_t>(best_lag) - 1];
      double y0 = r[static_cast<std::size_t>(best_lag)];
      double yp = r[static_cast<std::size_t>(best_lag) + 1];
      double denom = ym - 2.0 * y0 + yp;
      if (std::abs(denom) > 1e-12) {
        double delta = 0.5 * (ym - yp) / denom;
        if (delta > -1.0 && delta < 1.0) lag_star += delta;
      }
    }
    double f0 = sample_rate / lag_star;
    f0 = std::max(cfg.f_min, std::min(cfg.f_max, f0));
    track.f0[static_cast<std::size_t>(f)] = f0;
    track.voiced[static_cast<std::size_t>(f)] = true;
  }
  return track;
}

}  // namespace csd
