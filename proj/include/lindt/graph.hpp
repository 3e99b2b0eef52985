#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lindt/error.hpp"
#include "lindt/matrix.hpp"

namespace lindt {

using Label = std::int32_t;
using Labels = std::vector<Label>;
using NodeSet = std::vector<NodeId>;
using Rng = std::mt19937_64;

/// Marks a node without a label in a full-length label vector.
inline constexpr Label kNoLabel = -1;

using NeighborLists = std::vector<std::vector<NodeId>>;

/// Simple undirected attributed graph. Adjacency is a symmetric 0/1 pattern in
/// CSR form with sorted columns and no self-loops.
class Graph {
 public:
  Graph() = default;

  /// Builds from per-node neighbor lists. Lists are sorted and deduplicated;
  /// self-loops and asymmetric entries are rejected.
  Graph(NeighborLists neighbors, Matrix features, std::size_t num_classes,
        std::optional<Labels> latent_labels = std::nullopt)
      : num_classes_(num_classes), features_(std::move(features)), labels_(std::move(latent_labels)) {
    const std::size_t n = neighbors.size();
    if (features_.rows() != n)
      throw ShapeError("graph: feature matrix has " + std::to_string(features_.rows()) + " rows, expected " +
                       std::to_string(n));
    indptr_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& nb = neighbors[i];
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      for (NodeId j : nb) {
        if (j >= n) throw RangeError("graph: neighbor index " + std::to_string(j) + " out of range");
        if (j == i) throw ParameterError("graph: self-loop at node " + std::to_string(i));
      }
      indptr_[i + 1] = indptr_[i] + nb.size();
    }
    indices_.reserve(indptr_[n]);
    for (const auto& nb : neighbors) indices_.insert(indices_.end(), nb.begin(), nb.end());
    for (std::size_t i = 0; i < n; ++i)
      for (NodeId j : this->neighbors(i))
        if (!has_edge(j, i))
          throw ParameterError("graph: adjacency is not symmetric at (" + std::to_string(i) + "," +
                               std::to_string(j) + ")");
    if (labels_) {
      if (labels_->size() != n) throw ShapeError("graph: label vector length differs from node count");
      for (Label l : *labels_)
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes_)
          throw RangeError("graph: label " + std::to_string(l) + " outside [0," + std::to_string(num_classes_) + ")");
    }
  }

  /// Builds from an undirected edge list; each edge is inserted in both
  /// directions and duplicates collapse.
  static Graph from_edges(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges, Matrix features,
                          std::size_t num_classes, std::optional<Labels> latent_labels = std::nullopt) {
    NeighborLists nb(n);
    for (auto [u, v] : edges) {
      if (u >= n || v >= n) throw RangeError("graph: edge endpoint out of range");
      nb[u].push_back(v);
      nb[v].push_back(u);
    }
    return Graph(std::move(nb), std::move(features), num_classes, std::move(latent_labels));
  }

  std::size_t num_nodes() const noexcept { return indptr_.empty() ? 0 : indptr_.size() - 1; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t feature_dim() const noexcept { return features_.cols(); }
  /// Number of undirected edges.
  std::size_t num_edges() const noexcept { return indices_.size() / 2; }

  std::span<const NodeId> neighbors(std::size_t i) const {
    return {indices_.data() + indptr_[i], indptr_[i + 1] - indptr_[i]};
  }
  std::size_t degree(std::size_t i) const { return indptr_[i + 1] - indptr_[i]; }

  bool has_edge(std::size_t i, std::size_t j) const {
    auto nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), static_cast<NodeId>(j));
  }

  const Matrix& features() const noexcept { return features_; }
  const std::optional<Labels>& latent_labels() const noexcept { return labels_; }

  const std::vector<std::size_t>& indptr() const noexcept { return indptr_; }
  const std::vector<NodeId>& indices() const noexcept { return indices_; }

  NeighborLists neighbor_lists() const {
    NeighborLists out(num_nodes());
    for (std::size_t i = 0; i < out.size(); ++i) {
      auto nb = neighbors(i);
      out[i].assign(nb.begin(), nb.end());
    }
    return out;
  }

  /// Undirected edges (u < v) in lexicographic order.
  std::vector<std::pair<NodeId, NodeId>> edge_list() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    out.reserve(num_edges());
    for (std::size_t i = 0; i < num_nodes(); ++i)
      for (NodeId j : neighbors(i))
        if (i < j) out.emplace_back(static_cast<NodeId>(i), j);
    return out;
  }

  Graph with_topology(NeighborLists neighbors) const { return Graph(std::move(neighbors), features_, num_classes_, labels_); }
  Graph with_features(Matrix features) const { return Graph(neighbor_lists(), std::move(features), num_classes_, labels_); }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::size_t num_classes_ = 0;
  std::vector<std::size_t> indptr_{0};
  std::vector<NodeId> indices_;
  Matrix features_;
  std::optional<Labels> labels_;
};

/// Node roles. The three sets are sorted, disjoint and cover every node.
struct NodeSplit {
  NodeSet train;
  NodeSet val;
  NodeSet test;

  /// val and test together: the nodes targeted by perturbations and inference.
  NodeSet victims() const {
    NodeSet out;
    std::merge(val.begin(), val.end(), test.begin(), test.end(), std::back_inserter(out));
    return out;
  }

  std::size_t size() const noexcept { return train.size() + val.size() + test.size(); }

  friend bool operator==(const NodeSplit&, const NodeSplit&) = default;
};

/// Symmetric normalization D^{-1/2} (A + I) D^{-1/2}, D the degree matrix of A + I.
inline SparseMatrix normalize_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  SparseMatrix s;
  s.n = n;
  s.indptr.assign(n + 1, 0);
  s.indices.reserve(g.indices().size() + n);
  s.values.reserve(g.indices().size() + n);
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
  for (std::size_t i = 0; i < n; ++i) {
    bool self_done = false;
    for (NodeId j : g.neighbors(i)) {
      if (!self_done && j > i) {
        s.indices.push_back(static_cast<NodeId>(i));
        s.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
        self_done = true;
      }
      s.indices.push_back(j);
      s.values.push_back(inv_sqrt[i] * inv_sqrt[j]);
    }
    if (!self_done) {
      s.indices.push_back(static_cast<NodeId>(i));
      s.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
    }
    s.indptr[i + 1] = s.indices.size();
  }
  return s;
}

/// Fraction of undirected edges whose endpoints share a label.
inline double edge_homophily_ratio(const Graph& g, std::span<const Label> labels) {
  if (labels.size() != g.num_nodes()) throw ShapeError("edge_homophily_ratio: label vector length mismatch");
  if (g.num_edges() == 0) throw ParameterError("edge_homophily_ratio: empty edge set");
  std::size_t same = 0;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    for (NodeId j : g.neighbors(i))
      if (i < j && labels[i] == labels[j]) ++same;
  return static_cast<double>(same) / static_cast<double>(g.num_edges());
}

struct SbmParams {
  std::size_t n = 600;
  std::size_t k = 3;
  double p_intra = 0.05;
  double p_inter = 0.005;
  std::size_t feat_dim = 30;
  double feat_signal = 0.9;
  std::uint64_t seed = 0;
};

/// Stochastic block model with k equal blocks and class-band binary features.
/// Node i belongs to block i / (n / k).
inline Graph generate_sbm(const SbmParams& p) {
  if (!(p.p_inter >= 0.0 && p.p_inter <= p.p_intra && p.p_intra <= 1.0))
    throw ParameterError("generate_sbm: need 0 <= p_inter <= p_intra <= 1");
  if (!(p.feat_signal >= 0.0 && p.feat_signal <= 1.0)) throw ParameterError("generate_sbm: feat_signal outside [0,1]");
  if (p.k == 0 || p.n == 0 || p.n % p.k != 0) throw ParameterError("generate_sbm: n must be a positive multiple of k");
  if (p.feat_dim < p.k) throw ParameterError("generate_sbm: feat_dim must be at least k");

  Rng rng(p.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t block = p.n / p.k;
  Labels labels(p.n);
  for (std::size_t i = 0; i < p.n; ++i) labels[i] = static_cast<Label>(i / block);

  NeighborLists nb(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t j = i + 1; j < p.n; ++j) {
      const double prob = labels[i] == labels[j] ? p.p_intra : p.p_inter;
      if (unif(rng) < prob) {
        nb[i].push_back(static_cast<NodeId>(j));
        nb[j].push_back(static_cast<NodeId>(i));
      }
    }
  }

  const std::size_t band = p.feat_dim / p.k;
  const std::size_t width = band * p.k;
  const double off = p.k > 1 ? (1.0 - p.feat_signal) / static_cast<double>(p.k - 1) : 0.0;
  Matrix x(p.n, width);
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t f = 0; f < width; ++f) {
      const bool own = f / band == static_cast<std::size_t>(labels[i]);
      if (unif(rng) < (own ? p.feat_signal : off)) x(i, f) = 1.0;
    }
  }
  return Graph(std::move(nb), std::move(x), p.k, std::move(labels));
}

/// Uniformly random partition with train/val sizes round(fraction * n) and the
/// remainder assigned to test.
inline NodeSplit split_nodes(std::size_t n, double train_frac, double val_frac, double test_frac, std::uint64_t seed) {
  if (!(train_frac > 0 && val_frac > 0 && test_frac > 0)) throw ParameterError("split_nodes: fractions must be positive");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) throw ParameterError("split_nodes: fractions must sum to 1");
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) throw ParameterError("split_nodes: a split would be empty");

  NodeSet perm(n);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  NodeSplit s;
  s.train.assign(perm.begin(), perm.begin() + n_train);
  s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  s.test.assign(perm.begin() + n_train + n_val, perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

/// Replaces the labels of exactly round(noise_ratio * |nodes|) nodes, chosen
/// uniformly from `nodes`, with a different class drawn uniformly.
inline Labels inject_label_noise(const Labels& labels, double noise_ratio, std::size_t k, const NodeSet& nodes,
                                 std::uint64_t seed) {
  if (!(noise_ratio >= 0.0 && noise_ratio <= 1.0)) throw ParameterError("inject_label_noise: noise ratio outside [0,1]");
  const auto count = static_cast<std::size_t>(std::llround(noise_ratio * static_cast<double>(nodes.size())));
  Labels out = labels;
  if (count == 0) return out;
  if (k < 2) throw ParameterError("inject_label_noise: need at least two classes to flip labels");

  Rng rng(seed);
  NodeSet chosen = nodes;
  std::shuffle(chosen.begin(), chosen.end(), rng);
  chosen.resize(count);
  std::sort(chosen.begin(), chosen.end());
  std::uniform_int_distribution<Label> other(0, static_cast<Label>(k) - 2);
  for (NodeId v : chosen) {
    const Label orig = labels.at(v);
    if (orig < 0 || static_cast<std::size_t>(orig) >= k) throw RangeError("inject_label_noise: label outside [0,k)");
    const Label r = other(rng);
    out[v] = r < orig ? r : r + 1;
  }
  return out;
}

}  // namespace lindt
