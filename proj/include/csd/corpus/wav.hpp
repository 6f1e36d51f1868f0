#pragma once

// 16-bit PCM mono WAV reading and writing.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "csd/common.hpp"

namespace csd {

struct WavData {
  std::vector<double> samples;  // in [-1, 1)
  double sample_rate = 0.0;
};

namespace wavdetail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] |
                                    (static_cast<std::uint16_t>(p[1]) << 8));
}

inline void put_u32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 8) & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 16) & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 24) & 0xff));
}

inline void put_u16(std::vector<unsigned char>& v, std::uint16_t x) {
  v.push_back(static_cast<unsigned char>(x & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 8) & 0xff));
}

}  // namespace wavdetail

inline WavData load_wav(const std::string& path) {
  using namespace wavdetail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("load_wav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw validation_error("load_wav: " + path + " is not a RIFF/WAVE file");

  WavData out;
  std::uint16_t channels = 0, bits = 0, format = 0;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    char tag[5] = {0};
    std::memcpy(tag, bytes.data() + pos, 4);
    std::uint32_t sz = read_u32(bytes.data() + pos + 4);
    std::size_t body = pos + 8;
    if (body + sz > bytes.size())
      throw validation_error("load_wav: truncated chunk '" + std::string(tag) +
                             "' in " + path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (sz < 16) throw validation_error("load_wav: short fmt chunk");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      out.sample_rate = static_cast<double>(read_u32(bytes.data() + body + 4));
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt)
        throw validation_error("load_wav: data chunk before fmt chunk");
      if (format != 1 || channels != 1 || bits != 16)
        throw validation_error(
            "load_wav: " + path +
            " must be 16-bit PCM mono (format=" + std::to_string(format) +
            ", channels=" + std::to_string(channels) +
            ", bits=" + std::to_string(bits) + ")");
      std::size_t n = sz / 2;
      out.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::int16_t s;
        std::memcpy(&s, bytes.data() + body + 2 * i, 2);
        out.samples[i] = static_cast<double>(s) / 32768.0;
      }
      have_data = true;
    }
    pos = body + sz + (sz & 1);
  }
  if (!have_fmt || !have_data)
    throw validation_error("load_wav: missing fmt or data chunk in " + path);
  return out;
}

inline void save_wav(const std::string& path, const std::vector<double>& samples,
                     double sample_rate) {
  using namespace wavdetail;
  std::vector<unsigned char> bytes;
  bytes.reserve(44 + samples.size() * 2);
  std::uint32_t data_sz = static_cast<std::uint32_t>(samples.size() * 2);
  std::uint32_t sr = static_cast<std::uint32_t>(sample_rate);
  bytes.insert(bytes.end(), {'R', 'I', 'F', 'F'});
  put_u32(bytes, 36 + data_sz);
  bytes.insert(bytes.end(), {'W', 'A', 'V', 'E'});
  bytes.insert(bytes.end(), {'f', 'm', 't', ' '});
  put_u32(bytes, 16);
  put_u16(bytes, 1);   // PCM
  put_u16(bytes, 1);   // mono
  put_u32(bytes, sr);
  put_u32(bytes, sr * 2);  // byte rate
  put_u16(bytes, 2);       // block align
  put_u16(bytes, 16);      // bits
  bytes.insert(bytes.end(), {'d', 'a', 't', 'a'});
  put_u32(bytes, data_sz);
  for (double s : samples) {
    double clamped = std::max(-1.0, std::min(1.0, s));
    auto q = static_cast<std::int16_t>(std::lrint(clamped * 32767.0));
    put_u16(bytes, static_cast<std::uint16_t>(q));
  }
  std::ofstream outf(path, std::ios::binary);
  if (!outf) throw io_error("save_wav: cannot open " + path + " for writing");
  outf.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!outf) throw io_error("save_wav: write failed for " + path);
}

}  // namespace csd
