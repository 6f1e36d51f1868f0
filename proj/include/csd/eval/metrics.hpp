#pragma once

// Objective evaluation metrics: voicing decision error, gross pitch error,
// F0 frame error, and mel cepstral distortion with dynamic time warping.
//
// Conventions (stated because they vary across the literature):
//   GPE threshold 20% of the reference F0, counted over frames voiced in
//   both tracks. FFE = (voicing-error frames + gross-pitch-error frames)/N.
//   MCD uses 13 cepstra from a DCT-II of the log-mel frame, excludes c0, and
//   scales by (10/ln 10)*sqrt(2).

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "csd/common.hpp"
#include "csd/corpus/types.hpp"
#include "csd/eval/pitch.hpp"

namespace csd {

inline constexpr double kMcdScale = 4.342944819032518 * 1.4142135623730951;

struct MetricReport {
  double vde = 0.0;
  double gpe = 0.0;
  double ffe = 0.0;
  double mcd = 0.0;
  long n_frames = 0;
  bool gpe_defined = true;  // false when no frame is voiced in both tracks
};

namespace metricdetail {

inline void require_equal_frames(const PitchTrack& ref, const PitchTrack& syn,
                                 const char* op) {
  if (ref.n_frames() != syn.n_frames())
    throw validation_error(std::string(op) +
                           ": tracks must have equal frame counts (align "
                           "first); got " +
                           std::to_string(ref.n_frames()) + " vs " +
                           std::to_string(syn.n_frames()));
  if (ref.n_frames() == 0)
    throw validation_error(std::string(op) + ": empty tracks");
}

}  // namespace metricdetail

// Fraction of frames whose voicing decisions differ.
inline double vde(const PitchTrack& ref, const PitchTrack& syn) {
  metricdetail::require_equal_frames(ref, syn, "vde");
  long errors = 0;
  for (std::size_t i = 0; i < ref.n_frames(); ++i)
    if (ref.voiced[i] != syn.voiced[i]) ++errors;
  return static_cast<double>(errors) / static_cast<double>(ref.n_frames());
}

// Among frames voiced in both, the fraction with |f0_syn - f0_ref| exceeding
// threshold * f0_ref. gpe_defined (when passed) reports whether any
// both-voiced frame exists.
inline double gpe(const PitchTrack& ref, const PitchTrack& syn,
                  double threshold = 0.2, bool* gpe_defined = nullptr) {
  metricdetail::require_equal_frames(ref, syn, "gpe");
  long both = 0, errors = 0;
  for (std::size_t i = 0; i < ref.n_frames(); ++i) {
    if (!(ref.voiced[i] && syn.voiced[i])) continue;
    ++both;
    if (std::abs(syn.f0[i] - ref.f0[i]) > threshold * ref.f0[i]) ++errors;
  }
  if (gpe_defined != nullptr) *gpe_defined = (both > 0);
  if (both == 0) return 0.0;
  return static_cast<double>(errors) / static_cast<double>(both);
}

// (voicing-decision-error frames + gross-pitch-error frames) / N. The two
// sets are disjoint: gross errors only occur on frames voiced in both.
inline double ffe(const PitchTrack& ref, const PitchTrack& syn,
                  double threshold = 0.2) {
  metricdetail::require_equal_frames(ref, syn, "ffe");
  long errors = 0;
  for (std::size_t i = 0; i < ref.n_frames(); ++i) {
    if (ref.voiced[i] != syn.voiced[i]) {
      ++errors;
    } else if (ref.voiced[i] && syn.voiced[i] &&
               std::abs(syn.f0[i] - ref.f0[i]) > threshold * ref.f0[i]) {
      ++errors;
    }
  }
  return static_cast<double>(errors) / static_cast<double>(ref.n_frames());
}

// ---- dynamic time warping ----

// Path through an n x m cost lattice using steps (1,1), (1,0), (0,1) with
// unit weights. Returns the aligned index pairs in order.
template <typename CostFn>
std::vector<std::pair<long, long>> dtw_path(long n, long m, CostFn cost) {
  if (n <= 0 || m <= 0) throw validation_error("dtw: empty input");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(static_cast<std::size_t>(n * m), inf);
  auto at = [m](long i, long j) { return static_cast<std::size_t>(i * m + j); };
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < m; ++j) {
      double c = cost(i, j);
      double best;
      if (i == 0 && j == 0)
        best = 0.0;
      else if (i == 0)
        best = d[at(0, j - 1)];
      else if (j == 0)
        best = d[at(i - 1, 0)];
      else
        best = std::min(d[at(i - 1, j - 1)],
                        std::min(d[at(i - 1, j)], d[at(i, j - 1)]));
      d[at(i, j)] = c + best;
    }
  }
  std::vector<std::pair<long, long>> path;
  long i = n - 1, j = m - 1;
  path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      double diag = d[at(i - 1, j - 1)];
      double up = d[at(i - 1, j)];
      double left = d[at(i, j - 1)];
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    path.emplace_back(i, j);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// DTW alignment of two pitch tracks on (log-f0, voicing) features; the
// returned tracks both have the warping path's length.
inline std::pair<PitchTrack, PitchTrack> align_tracks(const PitchTrack& ref,
                                                      const PitchTrack& syn) {
  if (ref.n_frames() == 0 || syn.n_frames() == 0)
    throw validation_error("align_tracks: empty track");
  auto feature = [](const PitchTrack& t, long i) {
    double lf = t.voiced[static_cast<std::size_t>(i)]
                    ? std::log(t.f0[static_cast<std::size_t>(i)])
                    : 0.0;
    double v = t.voiced[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    return std::pair<double, double>(lf, v);
  };
  auto cost = [&](long i, long j) {
    auto [lr, vr] = feature(ref, i);
    auto [ls, vs] = feature(syn, j);
    double dl = lr - ls, dv = vr - vs;
    return dl * dl + dv * dv;
  };
  auto path = dtw_path(static_cast<long>(ref.n_frames()),
                       static_cast<long>(syn.n_frames()), cost);
  PitchTrack out_ref, out_syn;
  out_ref.frame_shift = ref.frame_shift;
  out_syn.frame_shift = syn.frame_shift;
  for (auto [i, j] : path) {
    out_ref.f0.push_back(ref.f0[static_cast<std::size_t>(i)]);
    out_ref.voiced.push_back(ref.voiced[static_cast<std::size_t>(i)]);
    out_syn.f0.push_back(syn.f0[static_cast<std::size_t>(j)]);
    out_syn.voiced.push_back(syn.voiced[static_cast<std::size_t>(j)]);
  }
  return {out_ref, out_syn};
}

// ---- mel cepstral distortion ----

// DCT-II cepstra of one log-mel frame: c_d = sum_b m_b cos(pi d (b+0.5) / B).
inline Eigen::VectorXd mel_cepstra(const Eigen::VectorXf& log_mel_frame,
                                   long n_coeffs) {
  const double pi = 3.14159265358979323846;
  long bands = log_mel_frame.size();
  Eigen::VectorXd c(n_coeffs);
  for (long d = 0; d < n_coeffs; ++d) {
    double acc = 0.0;
    for (long b = 0; b < bands; ++b)
      acc += static_cast<double>(log_mel_frame(b)) *
             std::cos(pi * static_cast<double>(d) *
                      (static_cast<double>(b) + 0.5) / static_cast<double>(bands));
    c(d) = acc;
  }
  return c;
}

// Euclidean cepstral distance excluding c0.
inline double cepstral_distance(const Eigen::VectorXd& a,
                                const Eigen::VectorXd& b) {
  double acc = 0.0;
  for (long d = 1; d < a.size(); ++d) {
    double diff = a(d) - b(d);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

// MCD in dB: kMcdScale * mean cepstral distance over aligned frame pairs.
// use_dtw=false requires equal frame counts and pairs frames one-to-one.
inline double mcd(const MelSpectrogram& ref_mel, const MelSpectrogram& syn_mel,
                  long n_coeffs = 13, bool use_dtw = true) {
  if (ref_mel.n_mels() != syn_mel.n_mels())
    throw validation_error("mcd: band count mismatch (" +
                           std::to_string(ref_mel.n_mels()) + " vs " +
                           std::to_string(syn_mel.n_mels()) + ")");
  if (ref_mel.n_frames() == 0 || syn_mel.n_frames() == 0)
    throw validation_error("mcd: empty mel");
  if (n_coeffs < 2 || n_coeffs > ref_mel.n_mels())
    throw validation_error("mcd: n_coeffs must be in [2, bands]");

  std::vector<Eigen::VectorXd> cr, cs;
  cr.reserve(static_cast<std::size_t>(ref_mel.n_frames()));
  cs.reserve(static_cast<std::size_t>(syn_mel.n_frames()));
  for (long t = 0; t < ref_mel.n_frames(); ++t)
    cr.push_back(mel_cepstra(ref_mel.data.col(t), n_coeffs));
  for (long t = 0; t < syn_mel.n_frames(); ++t)
    cs.push_back(mel_cepstra(syn_mel.data.col(t), n_coeffs));

  double total = 0.0;
  std::size_t pairs = 0;
  if (use_dtw) {
    auto cost = [&](long i, long j) {
      return cepstral_distance(cr[static_cast<std::size_t>(i)],
                               cs[static_cast<std::size_t>(j)]);
    };
    auto path = dtw_path(ref_mel.n_frames(), syn_mel.n_frames(), cost);
    for (auto [i, j] : path)
      total += cepstral_distance(cr[static_cast<std::size_t>(i)],
                                 cs[static_cast<std::size_t>(j)]);
    pairs = path.size();
  } else {
    if (ref_mel.n_frames() != syn_mel.n_frames())
      throw validation_error("mcd: equal frame counts required without DTW");
    for (long t = 0; t < ref_mel.n_frames(); ++t)
      total += cepstral_distance(cr[static_cast<std::size_t>(t)],
                                 cs[static_cast<std::size_t>(t)]);
    pairs = static_cast<std::size_t>(ref_mel.n_frames());
  }
  return kMcdScale * total / static_cast<double>(pairs);
}

// The full report for one (reference, synthesized) pair of tracks + mels.
inline MetricReport evaluate_pair(const PitchTrack& ref_track,
                                  const PitchTrack& syn_track,
                                  const MelSpectrogram& ref_mel,
                                  const MelSpectrogram& syn_mel,
                                  double gpe_threshold = 0.2,
                                  long n_coeffs = 13) {
  auto [ar, as] = align_tracks(ref_track, syn_track);
  MetricReport report;
  report.n_frames = static_cast<long>(ar.n_frames());
  report.vde = vde(ar, as);
  report.gpe = gpe(ar, as, gpe_threshold, &report.gpe_defined);
  report.ffe = ffe(ar, as, gpe_threshold);
  report.mcd = mcd(ref_mel, syn_mel, n_coeffs, true);
  return report;
}

}  // namespace csd
