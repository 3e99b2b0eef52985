#pragma once

// Helpers shared by the test binaries: random instances and independent
// reference implementations used as oracles.

#include <cmath>
#include <random>
#include <vector>

#include "lindt/lindt.hpp"

namespace lindt::testing {

/// Erdos-Renyi graph with uniform random features and labels.
inline Graph random_graph(std::size_t n, double p, std::size_t d, std::size_t k, std::uint64_t seed,
                          bool binary_features = false) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < p) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
  Matrix x(n, d);
  for (double& v : x.data()) v = binary_features ? (u(rng) < 0.3 ? 1.0 : 0.0) : u(rng) * 2.0 - 1.0;
  Labels labels(n);
  std::uniform_int_distribution<Label> cls(0, static_cast<Label>(k) - 1);
  for (Label& l : labels) l = cls(rng);
  return Graph::from_edges(n, edges, std::move(x), k, std::move(labels));
}

/// Dense D^{-1/2}(A+I)D^{-1/2} computed from the dense adjacency.
inline Matrix dense_normalized_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (g.has_edge(i, j)) a(i, j) = 1.0;
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, j) / std::sqrt(deg[i] * deg[j]);
  return out;
}

/// Masked mean cross-entropy evaluated with dense matrices, for finite differences.
inline double dense_loss(const GcnModel& m, const Matrix& a_hat, const Matrix& x, const Labels& labels,
                         const NodeSet& mask) {
  const std::size_t n = x.rows(), h = m.w1.cols(), k = m.w2.cols();
  Matrix xw(n, h), z(n, h), hw(n, k), logits(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j)
      for (std::size_t f = 0; f < x.cols(); ++f) xw(i, j) += x(i, f) * m.w1(f, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j) {
      for (std::size_t l = 0; l < n; ++l) z(i, j) += a_hat(i, l) * xw(l, j);
      z(i, j) = std::max(z(i, j), 0.0);
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j < h; ++j) hw(i, c) += z(i, j) * m.w2(j, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t l = 0; l < n; ++l) logits(i, c) += a_hat(i, l) * hw(l, c);
  double loss = 0.0;
  for (NodeId i : mask) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += std::exp(logits(i, c));
    loss -= logits(i, labels[i]) - std::log(s);
  }
  return loss / static_cast<double>(mask.size());
}

/// Straight-line reference of one label transition: first every node's
/// Bayesian label, then substitution of uncertain nodes from a frozen copy.
inline std::vector<int> naive_transition(const Graph& g, const std::vector<NodeId>& nodes,
                                         const std::vector<std::vector<double>>& probs,
                                         const std::vector<std::vector<double>>& phi, const std::vector<int>& prev,
                                         const std::vector<int>& y_auto, const std::vector<int>& background,
                                         Sampler sampler, Rng& rng) {
  const std::size_t k = phi.size();
  std::vector<int> z(nodes.size());
  std::vector<bool> unsure(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    int best = 0;
    double best_v = -1.0;
    for (std::size_t j = 0; j < k; ++j) {
      double v = 0.0;
      for (std::size_t a = 0; a < k; ++a) v += probs[i][a] * phi[a][j];
      if (v > best_v) {
        best_v = v;
        best = static_cast<int>(j);
      }
    }
    z[i] = best;
    unsure[i] = z[i] != prev[i] || z[i] != y_auto[i];
  }
  std::vector<int> frozen = background;
  for (std::size_t i = 0; i < nodes.size(); ++i) frozen[nodes[i]] = z[i];
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!unsure[i]) continue;
    std::vector<NodeId> nb;
    for (std::size_t u = 0; u < g.num_nodes(); ++u)
      if (g.has_edge(nodes[i], u)) nb.push_back(static_cast<NodeId>(u));
    if (nb.empty()) continue;
    if (sampler == Sampler::Random) {
      std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
      z[i] = frozen[nb[pick(rng)]];
      continue;
    }
    std::vector<double> score(k, 0.0);
    for (NodeId u : nb) {
      std::size_t deg = 0;
      for (std::size_t w = 0; w < g.num_nodes(); ++w) deg += g.has_edge(u, w);
      score[frozen[u]] += sampler == Sampler::Major ? 1.0 : static_cast<double>(deg);
    }
    int best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (score[c] > score[best]) best = static_cast<int>(c);
    z[i] = best;
  }
  return z;
}

inline bool row_stochastic(const Matrix& m, double tol) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double v : m.row(i)) {
      if (v < 0.0) return false;
      s += v;
    }
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

}  // namespace lindt::testing
