#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "lindt/error.hpp"
#include "lindt/gcn.hpp"
#include "lindt/graph.hpp"

namespace lindt {

/// Fraction of `nodes` where pred equals truth. Both vectors are full-length.
inline double accuracy(std::span<const Label> pred, std::span<const Label> truth, std::span<const NodeId> nodes) {
  if (nodes.empty()) throw ParameterError("accuracy: empty node set");
  std::size_t hit = 0;
  for (NodeId v : nodes) {
    if (pred[v] == kNoLabel || truth[v] == kNoLabel)
      throw ParameterError("accuracy: node " + std::to_string(v) + " has no label");
    hit += pred[v] == truth[v];
  }
  return static_cast<double>(hit) / static_cast<double>(nodes.size());
}

/// Normalized Shannon entropy of one distribution, 0 ln 0 := 0.
inline double normalized_entropy(std::span<const double> p) {
  if (p.size() < 2) throw ParameterError("normalized entropy undefined for K < 2");
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h / std::log(static_cast<double>(p.size()));
}

/// Mean normalized entropy over the given table rows (all rows when `rows` is empty).
inline double avg_normalized_entropy(const CategoricalTable& t, std::span<const std::size_t> rows = {}) {
  if (t.num_classes() < 2) throw ParameterError("avg_normalized_entropy: K = 1 has zero maximum entropy");
  if (rows.empty()) {
    if (t.rows() == 0) throw ParameterError("avg_normalized_entropy: empty table");
    double s = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) s += normalized_entropy(t.row(i));
    return s / static_cast<double>(t.rows());
  }
  double s = 0.0;
  for (std::size_t i : rows) s += normalized_entropy(t.row(i));
  return s / static_cast<double>(rows.size());
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("total_variation: distributions over different supports");
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
  return 0.5 * s;
}

/// Empirical class frequencies.
inline std::vector<double> label_distribution(std::span<const Label> labels, std::size_t k) {
  if (labels.empty()) throw ParameterError("label_distribution: empty label vector");
  std::vector<double> d(k, 0.0);
  for (Label l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= k) throw RangeError("label_distribution: label outside [0,K)");
    d[l] += 1.0;
  }
  for (double& x : d) x /= static_cast<double>(labels.size());
  return d;
}

/// K x K counts, rows indexed by truth and columns by prediction.
inline std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const Label> truth, std::span<const Label> pred,
                                                             std::span<const NodeId> nodes, std::size_t k) {
  std::vector<std::vector<std::size_t>> c(k, std::vector<std::size_t>(k, 0));
  for (NodeId v : nodes) {
    const Label t = truth[v], p = pred[v];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= k || static_cast<std::size_t>(p) >= k)
      throw RangeError("confusion_matrix: label outside [0,K) at node " + std::to_string(v));
    ++c[t][p];
  }
  return c;
}

}  // namespace lindt
