#pragma once

// Binary mel-spectrogram container.
//
// Layout (little-endian):
//   bytes 0..7   magic "MELSPEC1"
//   u32          frame count
//   u32          band count
//   f64          frame_shift in seconds
//   f32[frames * bands]  values, row-major by frame (all bands of frame 0,
//                        then frame 1, ...)
//
// The same container is reused for generic (rows x cols) f32 tensors such as
// exported predictor pairs; frame_shift is 0 there.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "csd/common.hpp"
#include "csd/corpus/types.hpp"

namespace csd {

inline constexpr char kMelMagic[8] = {'M', 'E', 'L', 'S', 'P', 'E', 'C', '1'};

inline void save_mel(const std::string& path, const MelSpectrogram& mel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("save_mel: cannot open " + path + " for writing");
  out.write(kMelMagic, 8);
  std::uint32_t frames = static_cast<std::uint32_t>(mel.n_frames());
  std::uint32_t bands = static_cast<std::uint32_t>(mel.n_mels());
  double shift = mel.frame_shift;
  out.write(reinterpret_cast<const char*>(&frames), 4);
  out.write(reinterpret_cast<const char*>(&bands), 4);
  out.write(reinterpret_cast<const char*>(&shift), 8);
  // column = frame in memory; file is frame-major
  for (long f = 0; f < mel.n_frames(); ++f)
    out.write(reinterpret_cast<const char*>(mel.data.col(f).data()),
              static_cast<std::streamsize>(bands * sizeof(float)));
  if (!out) throw io_error("save_mel: write failed for " + path);
}

inline MelSpectrogram load_mel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("load_mel: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMelMagic, 8) != 0)
    throw validation_error("load_mel: " + path + " has bad magic");
  std::uint32_t frames = 0, bands = 0;
  double shift = 0.0;
  in.read(reinterpret_cast<char*>(&frames), 4);
  in.read(reinterpret_cast<char*>(&bands), 4);
  in.read(reinterpret_cast<char*>(&shift), 8);
  if (!in) throw validation_error("load_mel: truncated header in " + path);
  MelSpectrogram mel;
  mel.frame_shift = shift;
  mel.data.resize(static_cast<long>(bands), static_cast<long>(frames));
  for (std::uint32_t f = 0; f < frames; ++f) {
    in.read(reinterpret_cast<char*>(mel.data.col(static_cast<long>(f)).data()),
            static_cast<std::streamsize>(bands * sizeof(float)));
  }
  if (!in) throw validation_error("load_mel: truncated data in " + path);
  return mel;
}

}  // namespace csd
