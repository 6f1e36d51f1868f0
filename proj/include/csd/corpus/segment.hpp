#pragma once

// Utterance segmentation and dataset splitting.

#include <cmath>
#include <string>
#include <vector>

#include "csd/common.hpp"
#include "csd/corpus/types.hpp"

namespace csd {

// Maps an alignment time to a frame index: round(time / frame_shift), ties
// away from zero.
inline long time_to_frame(double seconds, double frame_shift) {
  return static_cast<long>(std::round(seconds / frame_shift));
}

// Slices an utterance into one PhoneSegment per non-silence alignment entry.
// Frame range of entry k is [round(start/shift), round(end/shift)) clamped to
// the utterance's frames. An entry whose rounded range is empty is an error.
inline std::vector<PhoneSegment> segment_utterance(
    const Utterance& utt, const SilenceLabels& silence = SilenceLabels{}) {
  utt.validate(silence);
  if (utt.mel.n_frames() <= 0)
    throw validation_error("segment_utterance: utterance " + utt.id +
                           " has no mel frames");
  double shift = utt.mel.frame_shift;
  if (shift <= 0)
    throw validation_error("segment_utterance: utterance " + utt.id +
                           " has no frame_shift");
  std::vector<PhoneSegment> segments;
  int idx = 0;
  for (const auto& entry : utt.alignment) {
    if (silence.is_silence(entry.label)) continue;
    long f0 = time_to_frame(entry.start, shift);
    long f1 = time_to_frame(entry.end, shift);
    f0 = std::max<long>(0, std::min(f0, utt.mel.n_frames()));
    f1 = std::max<long>(0, std::min(f1, utt.mel.n_frames()));
    if (f1 <= f0)
      throw validation_error(
          "segment_utterance: utterance " + utt.id + ", entry '" + entry.label +
          "' [" + std::to_string(entry.start) + ", " + std::to_string(entry.end) +
          ") rounds to an empty frame range");
    PhoneSegment seg;
    seg.utterance_id = utt.id;
    seg.index_in_utterance = idx++;
    seg.phone = entry.label;
    seg.first_frame = f0;
    seg.mel = utt.mel.slice_frames(f0, f1 - f0);
    segments.push_back(std::move(seg));
  }
  if (segments.empty())
    throw validation_error("segment_utterance: utterance " + utt.id +
                           " has no non-silence segments");
  return segments;
}

// Deterministic shuffled split. Train size is round(N * fraction), ties away
// from zero; the remainder is the test set.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(
    const std::vector<T>& items, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw validation_error("split_dataset: train_fraction must be in (0, 1)");
  if (items.size() < 2)
    throw validation_error("split_dataset: need at least 2 items");
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  auto n_train = static_cast<std::size_t>(
      std::round(static_cast<double>(items.size()) * train_fraction));
  std::pair<std::vector<T>, std::vector<T>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < n_train)
      out.first.push_back(items[order[i]]);
    else
      out.second.push_back(items[order[i]]);
  }
  return out;
}

}  // namespace csd
