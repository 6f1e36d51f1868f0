#pragma once

// Mean silhouette coefficient over labeled embeddings, Euclidean distances.
// s(i) = (b - a) / max(a, b) with a the mean intra-cluster distance
// (excluding self) and b the smallest mean distance to another cluster;
// s(i) = 0 when both are zero.

#include <Eigen/Dense>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "csd/common.hpp"

namespace csd {

template <typename Label>
double embedding_separability(
    const std::vector<std::pair<Eigen::VectorXd, Label>>& items) {
  if (items.size() < 2)
    throw validation_error("embedding_separability: need at least 2 points");
  std::map<Label, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < items.size(); ++i)
    clusters[items[i].second].push_back(i);
  if (clusters.size() < 2)
    throw validation_error("embedding_separability: need at least 2 labels");
  for (const auto& [label, members] : clusters)
    if (members.size() < 2)
      throw validation_error(
          "embedding_separability: every label needs at least 2 points");

  auto dist = [&](std::size_t i, std::size_t j) {
    return (items[i].first - items[j].first).norm();
  };

  double total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Label& own = items[i].second;
    double a = 0.0;
    const auto& own_members = clusters.at(own);
    for (std::size_t j : own_members)
      if (j != i) a += dist(i, j);
    a /= static_cast<double>(own_members.size() - 1);

    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, members] : clusters) {
      if (label == own) continue;
      double mean = 0.0;
      for (std::size_t j : members) mean += dist(i, j);
      mean /= static_cast<double>(members.size());
      b = std::min(b, mean);
    }
    double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(items.size());
}

}  // namespace csd
