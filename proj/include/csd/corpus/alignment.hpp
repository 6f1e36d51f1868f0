#pragma once

// Alignment file ingestion. One JSON object per utterance:
//   {"id": "utt1", "entries": [{"label": "sil", "start": 0.0, "end": 0.1}, ...]}
// Entries must be sorted by start, non-overlapping, each with start < end.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csd/common.hpp"
#include "csd/corpus/types.hpp"

namespace csd {

struct AlignmentFile {
  std::string id;
  std::vector<AlignmentEntry> entries;
};

inline std::vector<AlignmentEntry> parse_alignment_entries(
    const nlohmann::json& entries_json, const std::string& context) {
  if (!entries_json.is_array())
    throw validation_error(context + ": 'entries' must be an array");
  if (entries_json.empty())
    throw validation_error(context +
                           ": empty entry list (utterance must contain at "
                           "least one phone)");
  std::vector<AlignmentEntry> entries;
  entries.reserve(entries_json.size());
  std::size_t idx = 0;
  for (const auto& e : entries_json) {
    std::string where = context + ", entry " + std::to_string(idx);
    if (!e.contains("label") || !e.contains("start") || !e.contains("end"))
      throw validation_error(where + ": missing label/start/end field");
    AlignmentEntry entry;
    entry.label = e.at("label").get<std::string>();
    entry.start = e.at("start").get<double>();
    entry.end = e.at("end").get<double>();
    if (!(entry.start < entry.end))
      throw validation_error(where + " ('" + entry.label +
                             "'): start must be < end");
    if (!entries.empty()) {
      const AlignmentEntry& prev = entries.back();
      if (entry.start < prev.start)
        throw validation_error(where + ": entries not sorted by start");
      if (entry.start < prev.end - 1e-9)
        throw validation_error(where + ": overlaps previous entry ('" +
                               prev.label + "')");
    }
    entries.push_back(std::move(entry));
    ++idx;
  }
  return entries;
}

inline AlignmentFile load_alignment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("load_alignment: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error("load_alignment: " + path +
                           ": JSON parse error: " + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j.contains("entries"))
    throw validation_error("load_alignment: " + path +
                           ": expected {\"id\", \"entries\"} object");
  AlignmentFile out;
  out.id = j.at("id").get<std::string>();
  out.entries = parse_alignment_entries(j.at("entries"), path);
  return out;
}

inline std::vector<AlignmentEntry> load_alignment(const std::string& path) {
  return load_alignment_file(path).entries;
}

inline void save_alignment(const std::string& path, const std::string& id,
                           const std::vector<AlignmentEntry>& entries) {
  nlohmann::json j;
  j["id"] = id;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : entries)
    j["entries"].push_back(
        {{"label", e.label}, {"start", e.start}, {"end", e.end}});
  std::ofstream out(path);
  if (!out) throw io_error("save_alignment: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace csd
