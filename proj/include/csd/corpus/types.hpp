#pragma once

// Core corpus domain types: phone inventory, mel-spectrograms, alignments,
// utterances and phone segments.

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <vector>

#include "csd/common.hpp"

namespace csd {

class PhoneInventory {
 public:
  PhoneInventory() = default;

  explicit PhoneInventory(std::vector<std::string> phones)
      : phones_(std::move(phones)) {
    for (std::size_t i = 0; i < phones_.size(); ++i) {
      if (!index_.emplace(phones_[i], static_cast<int>(i)).second)
        throw validation_error("PhoneInventory: duplicate label " + phones_[i]);
    }
    if (phones_.empty())
      throw validation_error("PhoneInventory: empty inventory");
  }

  // The 39 ARPABET English phones.
  static PhoneInventory arpabet() {
    return PhoneInventory({"AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH",
                           "D",  "DH", "EH", "ER", "EY", "F",  "G",  "HH",
                           "IH", "IY", "JH", "K",  "L",  "M",  "N",  "NG",
                           "OW", "OY", "P",  "R",  "S",  "SH", "T",  "TH",
                           "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"});
  }

  // Synthetic inventory P00..P<n-1>, used by the generated verification corpus.
  static PhoneInventory synthetic(int n_phones) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(n_phones));
    for (int i = 0; i < n_phones; ++i) {
      std::string s = "P";
      if (i < 10) s += "0";
      s += std::to_string(i);
      labels.push_back(s);
    }
    return PhoneInventory(std::move(labels));
  }

  int size() const { return static_cast<int>(phones_.size()); }

  const std::vector<std::string>& phones() const { return phones_; }

  const std::string& label(int idx) const {
    return phones_.at(static_cast<std::size_t>(idx));
  }

  bool contains(const std::string& label) const {
    return index_.count(label) != 0;
  }

  int index(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end())
      throw validation_error("PhoneInventory: unknown phone '" + label + "'");
    return it->second;
  }

 private:
  std::vector<std::string> phones_;
  std::unordered_map<std::string, int> index_;
};

// Log-mel spectrogram. Stored as f32 (the on-disk precision of the binary mel
// format), one column per frame.
struct MelSpectrogram {
  Eigen::MatrixXf data;       // n_mels x n_frames
  double frame_shift = 0.0;   // seconds between frames
  double frame_length = 0.0;  // analysis window in seconds
  double sample_rate = 0.0;   // Hz

  long n_frames() const { return data.cols(); }
  long n_mels() const { return data.rows(); }

  bool all_finite() const { return data.allFinite(); }

  MelSpectrogram slice_frames(long first, long count) const {
    MelSpectrogram out = *this;
    out.data = data.middleCols(first, count);
    return out;
  }
};

struct AlignmentEntry {
  std::string label;
  double start = 0.0;  // seconds
  double end = 0.0;

  void validate() const {
    if (!(start < end))
      throw validation_error("AlignmentEntry '" + label +
                             "': start must be < end (start=" +
                             std::to_string(start) +
                             ", end=" + std::to_string(end) + ")");
  }
};

// Labels treated as silence/pause during segmentation.
struct SilenceLabels {
  std::vector<std::string> labels = {"sil", "sp", ""};

  bool is_silence(const std::string& l) const {
    for (const auto& s : labels)
      if (s == l) return true;
    return false;
  }
};

struct Utterance {
  std::string id;
  std::string audio_path;  // empty for mel-only (synthetic) utterances
  std::vector<std::string> phone_sequence;
  std::vector<AlignmentEntry> alignment;
  MelSpectrogram mel;

  // phone_sequence must equal the alignment's non-silence labels in order.
  void validate(const SilenceLabels& silence = SilenceLabels{}) const {
    if (phone_sequence.empty())
      throw validation_error("Utterance " + id + ": empty phone sequence");
    std::vector<std::string> non_sil;
    for (const auto& e : alignment) {
      e.validate();
      if (!silence.is_silence(e.label)) non_sil.push_back(e.label);
    }
    for (std::size_t i = 1; i < alignment.size(); ++i) {
      if (alignment[i].start < alignment[i - 1].end - 1e-9)
        throw validation_error("Utterance " + id +
                               ": overlapping alignment entries at index " +
                               std::to_string(i));
      if (alignment[i].start < alignment[i - 1].start)
        throw validation_error("Utterance " + id +
                               ": alignment entries not sorted by start");
    }
    if (non_sil != phone_sequence)
      throw validation_error(
          "Utterance " + id +
          ": phone sequence does not match non-silence alignment labels");
  }
};

struct PhoneSegment {
  std::string utterance_id;
  int index_in_utterance = 0;
  std::string phone;
  long first_frame = 0;  // offset into the parent utterance's mel
  MelSpectrogram mel;

  long n_frames() const { return mel.n_frames(); }
};

}  // namespace csd
