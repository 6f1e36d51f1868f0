#pragma once

// Versioned checkpoint container.
//
// Layout (little-endian):
//   bytes 0..7  magic "CSDCKPT1"
//   u32         JSON header length
//   header      UTF-8 JSON: {"version": 1, "component": str, "epoch": int,
//               "config": obj, "rng_state": str, "extra": obj,
//               "groups": [{"name": str, "tensors":
//                 [{"name": str, "rows": int, "cols": int}, ...]}, ...]}
//   payload     per group, per tensor: rows*cols f32 values, column-major
//
// Values are stored f32; in-memory training uses f64, so save->load->save is
// byte-stable.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csd/common.hpp"
#include "csd/nn.hpp"

namespace csd {

struct Checkpoint {
  std::string component;
  long epoch = 0;
  nlohmann::json config;  // component config echo, includes config_hash
  std::string rng_state;
  nlohmann::json extra;   // component-specific metadata
  ModelParams params;
};

inline constexpr char kCkptMagic[8] = {'C', 'S', 'D', 'C', 'K', 'P', 'T', '1'};

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["version"] = 1;
  header["component"] = ckpt.component;
  header["epoch"] = ckpt.epoch;
  header["config"] = ckpt.config.is_null() ? nlohmann::json::object()
                                           : ckpt.config;
  header["rng_state"] = ckpt.rng_state;
  header["extra"] = ckpt.extra.is_null() ? nlohmann::json::object() : ckpt.extra;
  header["groups"] = nlohmann::json::array();
  for (const auto& [gname, group] : ckpt.params.groups) {
    nlohmann::json jg;
    jg["name"] = gname;
    jg["tensors"] = nlohmann::json::array();
    for (const auto& t : group.tensors)
      jg["tensors"].push_back(
          {{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
    header["groups"].push_back(jg);
  }
  std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("save_checkpoint: cannot open " + path);
  out.write(kCkptMagic, 8);
  std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
  out.write(reinterpret_cast<const char*>(&hlen), 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  std::vector<float> buf;
  for (const auto& [gname, group] : ckpt.params.groups) {
    for (const auto& t : group.tensors) {
      buf.resize(static_cast<std::size_t>(t.value.size()));
      for (long j = 0; j < t.value.cols(); ++j)
        for (long i = 0; i < t.value.rows(); ++i)
          buf[static_cast<std::size_t>(j * t.value.rows() + i)] =
              static_cast<float>(t.value(i, j));
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
  }
  if (!out) throw io_error("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw validation_error("load_checkpoint: " + path + " has bad magic");
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 4);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw validation_error("load_checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(std::string("load_checkpoint: bad header JSON: ") +
                           e.what());
  }
  if (header.value("version", 0) != 1)
    throw validation_error("load_checkpoint: unsupported version");

  Checkpoint ckpt;
  ckpt.component = header.value("component", "");
  ckpt.epoch = header.value("epoch", 0L);
  ckpt.config = header.value("config", nlohmann::json::object());
  ckpt.rng_state = header.value("rng_state", "");
  ckpt.extra = header.value("extra", nlohmann::json::object());

  std::vector<float> buf;
  for (const auto& jg : header.at("groups")) {
    ParamGroup group{jg.at("name").get<std::string>(), {}};
    for (const auto& jt : jg.at("tensors")) {
      ParamTensor t;
      t.name = jt.at("name").get<std::string>();
      long rows = jt.at("rows").get<long>();
      long cols = jt.at("cols").get<long>();
      t.value.resize(rows, cols);
      buf.resize(static_cast<std::size_t>(rows * cols));
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
      if (!in)
        throw validation_error("load_checkpoint: truncated payload at " +
                               group.name + "/" + t.name);
      for (long j = 0; j < cols; ++j)
        for (long i = 0; i < rows; ++i)
          t.value(i, j) = static_cast<double>(
              buf[static_cast<std::size_t>(j * rows + i)]);
      group.tensors.push_back(std::move(t));
    }
    ckpt.params.groups[group.name] = std::move(group);
  }
  return ckpt;
}

inline std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("file_hash_hex: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return hex64(fnv1a64(bytes));
}

}  // namespace csd
