#pragma once

// Embedding export for external visualization: one TSV row per (segment,
// encoder) with columns utterance_id, index, phone, embedding_kind, then the
// embedding values at f32 precision.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "csd/common.hpp"
#include "csd/plcsd/losses.hpp"
#include "csd/plcsd/model.hpp"

namespace csd {

struct EmbeddingRow {
  std::string utterance_id;
  int index = 0;
  std::string phone;
  std::string kind;  // "content" or "style"
  std::vector<float> values;
};

// n segments produce 2n rows (content then style per segment, in input
// order).
inline void export_embeddings(const std::vector<PhoneSegment>& segments,
                              ModelParams& params, const std::string& path) {
  if (segments.empty())
    throw validation_error("export_embeddings: no segments");
  std::ofstream out(path);
  if (!out) throw io_error("export_embeddings: cannot open " + path);
  char buf[64];
  auto write_row = [&](const PhoneSegment& seg, const char* kind,
                       const Eigen::VectorXd& values) {
    out << seg.utterance_id << '\t' << seg.index_in_utterance << '\t'
        << seg.phone << '\t' << kind;
    for (long i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.9g",
                    static_cast<double>(static_cast<float>(values(i))));
      out << '\t' << buf;
    }
    out << '\n';
  };
  for (const PhoneSegment& seg : segments) {
    write_row(seg, "content", encode_content(seg, params).values);
    write_row(seg, "style", encode_style(seg, params).values);
  }
  if (!out) throw io_error("export_embeddings: write failed for " + path);
}

inline std::vector<EmbeddingRow> load_embedding_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("load_embedding_tsv: cannot open " + path);
  std::vector<EmbeddingRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    EmbeddingRow row;
    std::string field;
    if (!std::getline(ss, row.utterance_id, '\t') ||
        !std::getline(ss, field, '\t'))
      throw validation_error("load_embedding_tsv: short row in " + path);
    row.index = std::stoi(field);
    if (!std::getline(ss, row.phone, '\t') ||
        !std::getline(ss, row.kind, '\t'))
      throw validation_error("load_embedding_tsv: short row in " + path);
    while (std::getline(ss, field, '\t'))
      row.values.push_back(std::stof(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace csd
