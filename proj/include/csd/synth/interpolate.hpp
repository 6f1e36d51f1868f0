#pragma once

// Linear interpolation of a style embedding sequence to a target length.
//
// For L, T > 1 the position mapping is p(j) = j*(L-1)/(T-1);
// output_j = (1-a)*seq[floor(p)] + a*seq[ceil(p)] with a = p - floor(p).
// Endpoints are preserved exactly. T = 1 picks the element at (L-1)/2
// (integer division); L = 1 replicates.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "csd/common.hpp"

namespace csd {

using StyleSequence = std::vector<Eigen::VectorXd>;

inline StyleSequence interpolate_style_sequence(const StyleSequence& seq,
                                                long target_len) {
  if (seq.empty())
    throw validation_error("interpolate_style_sequence: empty input");
  if (target_len < 1)
    throw validation_error("interpolate_style_sequence: target_len >= 1");
  long length = static_cast<long>(seq.size());

  StyleSequence out;
  out.reserve(static_cast<std::size_t>(target_len));
  if (length == 1) {
    for (long j = 0; j < target_len; ++j) out.push_back(seq[0]);
    return out;
  }
  if (target_len == 1) {
    out.push_back(seq[static_cast<std::size_t>((length - 1) / 2)]);
    return out;
  }
  for (long j = 0; j < target_len; ++j) {
    if (j == 0) {
      out.push_back(seq.front());
      continue;
    }
    if (j == target_len - 1) {
      out.push_back(seq.back());
      continue;
    }
    double p = static_cast<double>(j) * static_cast<double>(length - 1) /
               static_cast<double>(target_len - 1);
    long lo = static_cast<long>(std::floor(p));
    long hi = std::min(lo + 1, length - 1);
    double alpha = p - static_cast<double>(lo);
    out.push_back((1.0 - alpha) * seq[static_cast<std::size_t>(lo)] +
                  alpha * seq[static_cast<std::size_t>(hi)]);
  }
  return out;
}

}  // namespace csd
