#pragma once

// Corpus manifest: a JSON list of utterance records. Each record names the
// audio (or a precomputed mel binary), the transcript phone sequence, and the
// alignment file:
//   [{"id": "...", "audio": "path.wav", "mel": "path.mel",
//     "phones": ["HH", "AH"], "alignment": "path.json"}, ...]
// Exactly one of "audio"/"mel" must be present per record.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csd/common.hpp"

namespace csd {

struct ManifestRecord {
  std::string id;
  std::string audio_path;  // may be empty when mel_path is set
  std::string mel_path;    // may be empty when audio_path is set
  std::vector<std::string> phones;
  std::string alignment_path;
};

inline std::vector<ManifestRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("load_manifest: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error("load_manifest: " + path +
                           ": JSON parse error: " + e.what());
  }
  if (!j.is_array())
    throw validation_error("load_manifest: " + path + ": expected a JSON list");
  std::vector<ManifestRecord> records;
  std::size_t idx = 0;
  for (const auto& r : j) {
    std::string where = path + ", record " + std::to_string(idx);
    if (!r.contains("id") || !r.contains("phones") || !r.contains("alignment"))
      throw validation_error(where + ": missing id/phones/alignment field");
    ManifestRecord rec;
    rec.id = r.at("id").get<std::string>();
    if (r.contains("audio")) rec.audio_path = r.at("audio").get<std::string>();
    if (r.contains("mel")) rec.mel_path = r.at("mel").get<std::string>();
    if (rec.audio_path.empty() == rec.mel_path.empty())
      throw validation_error(where + " (" + rec.id +
                             "): exactly one of 'audio'/'mel' is required");
    rec.phones = r.at("phones").get<std::vector<std::string>>();
    rec.alignment_path = r.at("alignment").get<std::string>();
    records.push_back(std::move(rec));
    ++idx;
  }
  return records;
}

inline void save_manifest(const std::string& path,
                          const std::vector<ManifestRecord>& records) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json rec;
    rec["id"] = r.id;
    if (!r.audio_path.empty()) rec["audio"] = r.audio_path;
    if (!r.mel_path.empty()) rec["mel"] = r.mel_path;
    rec["phones"] = r.phones;
    rec["alignment"] = r.alignment_path;
    j.push_back(rec);
  }
  std::ofstream out(path);
  if (!out) throw io_error("save_manifest: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace csd
