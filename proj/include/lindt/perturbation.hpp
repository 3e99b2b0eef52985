#pragma once

// Topological perturbations applied to validation/test ("victim") nodes:
// random perturbators, link/feature sparsity, and a greedy evasion attack.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lindt/error.hpp"
#include "lindt/gcn.hpp"
#include "lindt/graph.hpp"

namespace lindt {

enum class Scenario { None, RdmPert, InfoSparse, AdvAttack };

inline std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::None: return "none";
    case Scenario::RdmPert: return "rdmPert";
    case Scenario::InfoSparse: return "infoSparse";
    case Scenario::AdvAttack: return "advAttack";
  }
  return "?";
}

inline Scenario parse_scenario(std::string_view s) {
  if (s == "none") return Scenario::None;
  if (s == "rdmPert") return Scenario::RdmPert;
  if (s == "infoSparse") return Scenario::InfoSparse;
  if (s == "advAttack") return Scenario::AdvAttack;
  throw ParameterError("unknown scenario '" + std::string(s) + "'");
}

struct PerturbationSpec {
  Scenario scenario = Scenario::RdmPert;
  double perturbator_fraction = 0.01;
  std::size_t connections_per_perturbator = 100;
  double link_sparsity = 0.9;
  double feature_sparsity = 1.0;
  std::size_t n_pert_links = 2;
  std::size_t n_pert_features = 20;
  std::size_t degree_low = 0;  // exclusive
  std::size_t degree_high = 10;  // exclusive
  /// Remove link_sparsity of the victims' links before attacking.
  bool presparsify = false;
  /// Non-neighbors sampled as edge-addition candidates per attack step.
  std::size_t addition_candidates = 200;
  /// Feature flips evaluated exactly after first-order ranking.
  std::size_t feature_candidates = 10;
  std::uint64_t seed = 0;

  void validate() const {
    auto frac = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!frac(perturbator_fraction) || !frac(link_sparsity) || !frac(feature_sparsity))
      throw ParameterError("perturbation spec: fractions must lie in [0,1]");
  }
};

struct VictimChange {
  NodeId node = 0;
  std::size_t edges_added = 0;
  std::size_t edges_removed = 0;
  std::size_t features_changed = 0;
};

struct PerturbationResult {
  Graph graph;
  NodeSet targets;       // nodes the scenario acted on (reporting set)
  NodeSet perturbators;  // rdmPert only
  std::vector<VictimChange> changes;  // one entry per victim, sorted by node
  std::size_t capped = 0;  // perturbators that could not reach the requested connection count
};

namespace perturb_detail {

inline std::vector<VictimChange> blank_changes(std::span<const NodeId> victims) {
  std::vector<VictimChange> c;
  c.reserve(victims.size());
  for (NodeId v : victims) c.push_back({v, 0, 0, 0});
  return c;
}

inline VictimChange* find_change(std::vector<VictimChange>& c, NodeId v) {
  auto it = std::lower_bound(c.begin(), c.end(), v, [](const VictimChange& a, NodeId b) { return a.node < b; });
  return it != c.end() && it->node == v ? &*it : nullptr;
}

inline NodeSet sorted_unique(std::span<const NodeId> nodes) {
  NodeSet s(nodes.begin(), nodes.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

inline void insert_sorted(std::vector<NodeId>& v, NodeId x) { v.insert(std::lower_bound(v.begin(), v.end(), x), x); }
inline void erase_sorted(std::vector<NodeId>& v, NodeId x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it != v.end() && *it == x) v.erase(it);
}
inline bool contains_sorted(const std::vector<NodeId>& v, NodeId x) { return std::binary_search(v.begin(), v.end(), x); }

}  // namespace perturb_detail

/// ceil(fraction * |victims|) victims become perturbators and connect to
/// uniformly chosen distinct other victims they are not yet linked to.
inline PerturbationResult random_perturbation(const Graph& g, std::span<const NodeId> victims_in,
                                              const PerturbationSpec& spec) {
  using namespace perturb_detail;
  spec.validate();
  const NodeSet victims = sorted_unique(victims_in);
  PerturbationResult r;
  r.targets = victims;
  r.changes = blank_changes(victims);
  if (victims.empty() || spec.connections_per_perturbator == 0) {
    r.graph = g;
    return r;
  }
  Rng rng(spec.seed);
  const auto count = static_cast<std::size_t>(
      std::ceil(spec.perturbator_fraction * static_cast<double>(victims.size()) - 1e-9));
  NodeSet pool = victims;
  std::shuffle(pool.begin(), pool.end(), rng);
  r.perturbators.assign(pool.begin(), pool.begin() + std::min(count, pool.size()));
  std::sort(r.perturbators.begin(), r.perturbators.end());

  NeighborLists adj = g.neighbor_lists();
  for (NodeId p : r.perturbators) {
    NodeSet candidates;
    for (NodeId v : victims)
      if (v != p && !contains_sorted(adj[p], v)) candidates.push_back(v);
    std::size_t want = spec.connections_per_perturbator;
    if (candidates.size() < want) {
      want = candidates.size();
      ++r.capped;
    }
    // partial Fisher-Yates: the first `want` entries are a uniform sample
    for (std::size_t i = 0; i < want; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
      std::swap(candidates[i], candidates[pick(rng)]);
      const NodeId u = candidates[i];
      insert_sorted(adj[p], u);
      insert_sorted(adj[u], p);
      find_change(r.changes, p)->edges_added++;
      find_change(r.changes, u)->edges_added++;
    }
  }
  r.graph = g.with_topology(std::move(adj));
  return r;
}

/// For each victim, drops round(link_sparsity * degree) of its incident edges
/// and zeroes round(feature_sparsity * d) of its feature entries.
inline PerturbationResult sparsify(const Graph& g, std::span<const NodeId> victims_in, const PerturbationSpec& spec) {
  using namespace perturb_detail;
  spec.validate();
  const NodeSet victims = sorted_unique(victims_in);
  PerturbationResult r;
  r.targets = victims;
  r.changes = blank_changes(victims);
  Rng rng(spec.seed);
  NeighborLists adj = g.neighbor_lists();
  Matrix x = g.features();
  const std::size_t d = x.cols();
  const auto n_feat = static_cast<std::size_t>(std::llround(spec.feature_sparsity * static_cast<double>(d)));
  std::vector<std::size_t> cols(d);

  for (NodeId v : victims) {
    auto nb = adj[v];
    const auto drop = static_cast<std::size_t>(std::llround(spec.link_sparsity * static_cast<double>(nb.size())));
    std::shuffle(nb.begin(), nb.end(), rng);
    for (std::size_t i = 0; i < drop; ++i) {
      const NodeId u = nb[i];
      erase_sorted(adj[v], u);
      erase_sorted(adj[u], v);
      find_change(r.changes, v)->edges_removed++;
      if (auto* c = find_change(r.changes, u)) c->edges_removed++;
    }
    if (n_feat == 0) continue;
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    std::shuffle(cols.begin(), cols.end(), rng);
    for (std::size_t i = 0; i < n_feat; ++i) {
      double& cell = x(v, cols[i]);
      if (cell != 0.0) find_change(r.changes, v)->features_changed++;
      cell = 0.0;
    }
  }
  r.graph = Graph(std::move(adj), std::move(x), g.num_classes(), g.latent_labels());
  return r;
}

namespace perturb_detail {

/// Mutable graph state for the evasion attack with cached X W1.
class AttackState {
 public:
  AttackState(const Graph& g, const GcnModel& model)
      : adj_(g.neighbor_lists()), x_(g.features()), xw1_(matmul(x_, model.w1)), model_(model) {}

  NeighborLists& adj() { return adj_; }
  Matrix& x() { return x_; }
  const Matrix& xw1() const { return xw1_; }

  double inv_sqrt_deg(NodeId u) const { return 1.0 / std::sqrt(static_cast<double>(adj_[u].size() + 1)); }

  /// Hidden activation of u before ReLU: sum over closed neighborhood.
  std::vector<double> z1(NodeId u) const {
    const std::size_t h = model_.hidden_units();
    std::vector<double> z(h, 0.0);
    const double su = inv_sqrt_deg(u);
    auto add = [&](NodeId w) {
      const double c = su * inv_sqrt_deg(w);
      auto row = xw1_.row(w);
      for (std::size_t j = 0; j < h; ++j) z[j] += c * row[j];
    };
    add(u);
    for (NodeId w : adj_[u]) add(w);
    return z;
  }

  /// Class distribution of v under the current state.
  std::vector<double> probs(NodeId v) const {
    const std::size_t h = model_.hidden_units(), k = model_.num_classes();
    std::vector<double> agg(h, 0.0);
    const double sv = inv_sqrt_deg(v);
    auto add = [&](NodeId u) {
      auto z = z1(u);
      const double c = sv * inv_sqrt_deg(u);
      for (std::size_t j = 0; j < h; ++j)
        if (z[j] > 0.0) agg[j] += c * z[j];
    };
    add(v);
    for (NodeId u : adj_[v]) add(u);
    Matrix logits(1, k);
    for (std::size_t j = 0; j < h; ++j) {
      if (agg[j] == 0.0) continue;
      for (std::size_t c = 0; c < k; ++c) logits(0, c) += agg[j] * model_.w2(j, c);
    }
    softmax_rows(logits);
    return {logits.data().begin(), logits.data().end()};
  }

  void toggle_edge(NodeId v, NodeId u) {
    if (contains_sorted(adj_[v], u)) {
      erase_sorted(adj_[v], u);
      erase_sorted(adj_[u], v);
    } else {
      insert_sorted(adj_[v], u);
      insert_sorted(adj_[u], v);
    }
  }

  void toggle_feature(NodeId v, std::size_t f) {
    const double delta = x_(v, f) != 0.0 ? -1.0 : 1.0;
    x_(v, f) += delta;
    auto row = xw1_.row(v);
    auto w = model_.w1.row(f);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += delta * w[j];
  }

  /// First-order change of p_c(v) for toggling each feature of v, holding
  /// ReLU masks fixed.
  std::vector<double> feature_scores(NodeId v, Label c) const {
    const std::size_t h = model_.hidden_units(), k = model_.num_classes(), d = x_.cols();
    auto p = probs(v);
    // d p_c / d logits
    std::vector<double> dlogit(k);
    for (std::size_t j = 0; j < k; ++j) dlogit[j] = p[c] * ((j == static_cast<std::size_t>(c) ? 1.0 : 0.0) - p[j]);
    // sensitivity of p_c to the hidden pre-activation row of v: W2 * dlogit
    std::vector<double> w2g(h, 0.0);
    for (std::size_t j = 0; j < h; ++j)
      for (std::size_t q = 0; q < k; ++q) w2g[j] += model_.w2(j, q) * dlogit[q];
    // XW1_v reaches z1_u with weight Â_uv, and h1_u reaches v with weight Â_vu
    std::vector<double> m(h, 0.0);
    const double sv = inv_sqrt_deg(v);
    auto add = [&](NodeId u) {
      auto z = z1(u);
      const double a = sv * inv_sqrt_deg(u);
      for (std::size_t j = 0; j < h; ++j)
        if (z[j] > 0.0) m[j] += a * a * w2g[j];
    };
    add(v);
    for (NodeId u : adj_[v]) add(u);
    std::vector<double> s(d, 0.0);
    for (std::size_t f = 0; f < d; ++f) {
      const double delta = x_(v, f) != 0.0 ? -1.0 : 1.0;
      auto w = model_.w1.row(f);
      double acc = 0.0;
      for (std::size_t j = 0; j < h; ++j) acc += m[j] * w[j];
      s[f] = delta * acc;
    }
    return s;
  }

 private:
  NeighborLists adj_;
  Matrix x_;
  Matrix xw1_;
  const GcnModel& model_;
};

}  // namespace perturb_detail

/// Greedy direct evasion attack on victims whose degree lies strictly inside
/// the degree window. Each accepted flip lowers the model's probability of the
/// victim's currently predicted class; the model itself is not modified.
inline PerturbationResult adversarial_attack(const Graph& g_in, const GcnModel& model,
                                             std::span<const NodeId> victims_in, const PerturbationSpec& spec) {
  using namespace perturb_detail;
  spec.validate();
  for (double v : g_in.features().data())
    if (v != 0.0 && v != 1.0) throw UnsupportedInputError("adversarial_attack: features must be binary");
  require_shape(g_in.feature_dim() == model.input_dim(), "adversarial_attack: model input width differs from features");

  const NodeSet victims = sorted_unique(victims_in);
  NodeSet targets;
  for (NodeId v : victims) {
    const std::size_t deg = g_in.degree(v);
    if (deg > spec.degree_low && deg < spec.degree_high) targets.push_back(v);
  }

  Graph g = g_in;
  if (spec.presparsify) {
    PerturbationSpec s = spec;
    s.feature_sparsity = 0.0;
    g = sparsify(g_in, victims, s).graph;
  }

  PerturbationResult r;
  r.targets = targets;
  r.changes = blank_changes(targets);
  if (spec.n_pert_links == 0 && spec.n_pert_features == 0) {
    r.graph = g;
    return r;
  }

  Rng rng(spec.seed);
  AttackState st(g, model);
  const std::size_t n = g.num_nodes();
  for (NodeId v : targets) {
    auto p0 = st.probs(v);
    const Label c = argmax(p0);
    double best_p = p0[c];
    VictimChange* ch = find_change(r.changes, v);

    for (std::size_t step = 0; step < spec.n_pert_links; ++step) {
      NodeSet cand = st.adj()[v];
      const std::size_t non_nb = n - 1 - st.adj()[v].size();
      const std::size_t want = std::min(spec.addition_candidates, non_nb);
      NodeSet added;
      if (want > 0) {
        std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
        while (added.size() < want) {
          const NodeId u = pick(rng);
          if (u == v || contains_sorted(st.adj()[v], u) || contains_sorted(added, u)) continue;
          insert_sorted(added, u);
        }
      }
      cand.insert(cand.end(), added.begin(), added.end());
      NodeId best_u = 0;
      double step_best = best_p;
      bool found = false;
      for (NodeId u : cand) {
        st.toggle_edge(v, u);
        const double pc = st.probs(v)[c];
        st.toggle_edge(v, u);
        if (pc < step_best) {
          step_best = pc;
          best_u = u;
          found = true;
        }
      }
      if (!found) break;
      const bool removal = contains_sorted(st.adj()[v], best_u);
      st.toggle_edge(v, best_u);
      best_p = step_best;
      (removal ? ch->edges_removed : ch->edges_added)++;
      if (auto* other = find_change(r.changes, best_u)) (removal ? other->edges_removed : other->edges_added)++;
    }

    for (std::size_t step = 0; step < spec.n_pert_features; ++step) {
      auto scores = st.feature_scores(v, c);
      std::vector<std::size_t> order(scores.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      const std::size_t top = std::min(spec.feature_candidates, order.size());
      std::partial_sort(order.begin(), order.begin() + top, order.end(),
                        [&](std::size_t a, std::size_t b) { return scores[a] < scores[b] || (scores[a] == scores[b] && a < b); });
      std::size_t best_f = 0;
      double step_best = best_p;
      bool found = false;
      for (std::size_t i = 0; i < top; ++i) {
        st.toggle_feature(v, order[i]);
        const double pc = st.probs(v)[c];
        st.toggle_feature(v, order[i]);
        if (pc < step_best) {
          step_best = pc;
          best_f = order[i];
          found = true;
        }
      }
      if (!found) break;
      st.toggle_feature(v, best_f);
      best_p = step_best;
      ch->features_changed++;
    }
  }
  r.graph = Graph(std::move(st.adj()), std::move(st.x()), g.num_classes(), g.latent_labels());
  return r;
}

/// Dispatches on spec.scenario. `model` is needed only for advAttack.
inline PerturbationResult perturb(const Graph& g, const GcnModel* model, std::span<const NodeId> victims,
                                  const PerturbationSpec& spec) {
  switch (spec.scenario) {
    case Scenario::None: {
      PerturbationResult r;
      r.graph = g;
      r.targets = perturb_detail::sorted_unique(victims);
      r.changes = perturb_detail::blank_changes(r.targets);
      return r;
    }
    case Scenario::RdmPert: return random_perturbation(g, victims, spec);
    case Scenario::InfoSparse: return sparsify(g, victims, spec);
    case Scenario::AdvAttack:
      if (!model) throw ParameterError("perturb: advAttack needs a trained model");
      return adversarial_attack(g, *model, victims, spec);
  }
  throw ParameterError("perturb: unknown scenario");
}

/// Sidecar manifest: '#'-prefixed key=value lines for the spec, then a CSV
/// table of per-victim change counts.
inline void write_manifest(const PerturbationResult& r, const PerturbationSpec& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "# scenario=" << to_string(s.scenario) << '\n'
      << "# perturbator_fraction=" << s.perturbator_fraction << '\n'
      << "# connections_per_perturbator=" << s.connections_per_perturbator << '\n'
      << "# link_sparsity=" << s.link_sparsity << '\n'
      << "# feature_sparsity=" << s.feature_sparsity << '\n'
      << "# n_pert_links=" << s.n_pert_links << '\n'
      << "# n_pert_features=" << s.n_pert_features << '\n'
      << "# degree_window=(" << s.degree_low << "," << s.degree_high << ")\n"
      << "# presparsify=" << (s.presparsify ? "true" : "false") << '\n'
      << "# seed=" << s.seed << '\n';
  out << "node,perturbator,edges_added,edges_removed,features_changed\n";
  for (const auto& c : r.changes) {
    const bool p = std::binary_search(r.perturbators.begin(), r.perturbators.end(), c.node);
    out << c.node << ',' << (p ? 1 : 0) << ',' << c.edges_added << ',' << c.edges_removed << ',' << c.features_changed
        << '\n';
  }
}

}  // namespace lindt
