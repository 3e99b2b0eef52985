#pragma once

// Label inference by Bayesian label transition with topology-based label
// substitution for uncertain nodes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lindt/error.hpp"
#include "lindt/gcn.hpp"
#include "lindt/graph.hpp"
#include "lindt/metrics.hpp"

namespace lindt {

/// Row-stochastic K x K matrix; row k is the distribution of target labels
/// given source class k.
struct TransitionMatrix {
  Matrix phi;

  std::size_t num_classes() const noexcept { return phi.rows(); }
  static TransitionMatrix identity(std::size_t k) {
    TransitionMatrix t{Matrix(k, k)};
    for (std::size_t i = 0; i < k; ++i) t.phi(i, i) = 1.0;
    return t;
  }
};

/// Per-row Dirichlet concentrations; alpha[k] is the scalar concentration of row k.
struct DirichletPrior {
  std::vector<double> alpha;

  static DirichletPrior uniform(std::size_t k, double a) { return {std::vector<double>(k, a)}; }
  double min() const { return *std::min_element(alpha.begin(), alpha.end()); }
  double max() const { return *std::max_element(alpha.begin(), alpha.end()); }
};

enum class Sampler { GibbsVanilla, Random, Major, Degree };
enum class EstimatorMode { PosteriorMean, DirichletSample };
/// How the warm-up matrix counts train predictions.
enum class WarmupCounts { Argmax, Expected };
/// Which labels of inference nodes the substitution step reads.
enum class SubstitutionSource { Inferred, Auto };

inline std::string_view to_string(Sampler s) {
  switch (s) {
    case Sampler::GibbsVanilla: return "gibbs";
    case Sampler::Random: return "random";
    case Sampler::Major: return "major";
    case Sampler::Degree: return "degree";
  }
  return "?";
}

inline Sampler parse_sampler(std::string_view s) {
  if (s == "gibbs" || s == "gibbs_vanilla") return Sampler::GibbsVanilla;
  if (s == "random") return Sampler::Random;
  if (s == "major") return Sampler::Major;
  if (s == "degree") return Sampler::Degree;
  throw ParameterError("unknown sampler '" + std::string(s) + "'");
}

struct InferenceConfig {
  std::size_t warmup_steps = 40;
  std::size_t num_transitions = 100;
  std::size_t retrain_interval = 10;
  std::size_t retrain_epochs = 6;
  Sampler sampler = Sampler::Major;
  double initial_alpha = 0.1;
  bool dynamic_alpha = true;
  double alpha_floor = 1e-3;
  EstimatorMode estimator = EstimatorMode::PosteriorMean;
  WarmupCounts warmup_counts = WarmupCounts::Argmax;
  SubstitutionSource substitution = SubstitutionSource::Inferred;
  /// Re-derive auto-generated labels from the retrained classifier.
  bool refresh_auto_labels = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_transitions < 1) throw ParameterError("inference config: need at least one transition");
    if (warmup_steps > num_transitions)
      throw ParameterError("inference config: warmup_steps exceeds num_transitions");
    if (retrain_interval < 1) throw ParameterError("inference config: retrain_interval must be at least 1");
    if (!(initial_alpha > 0.0)) throw ParameterError("inference config: initial alpha must be positive");
    if (!(alpha_floor > 0.0)) throw ParameterError("inference config: alpha floor must be positive");
  }
};

/// Dirichlet-smoothed transition estimate from paired labels. Counts are
/// n[k][j] = #{i : ref[i] = k, noisy[i] = j}.
inline TransitionMatrix estimate_from_counts(const Matrix& counts, const DirichletPrior& prior, EstimatorMode mode,
                                             Rng& rng) {
  const std::size_t k = counts.rows();
  if (prior.alpha.size() != k) throw ShapeError("estimate_transition_matrix: prior length differs from K");
  TransitionMatrix t{Matrix(k, k)};
  for (std::size_t r = 0; r < k; ++r) {
    const double a = prior.alpha[r];
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += counts(r, j);
    if (mode == EstimatorMode::DirichletSample) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        std::gamma_distribution<double> gamma(a + counts(r, j), 1.0);
        t.phi(r, j) = gamma(rng);
        s += t.phi(r, j);
      }
      if (s > 0.0 && std::isfinite(s)) {
        for (std::size_t j = 0; j < k; ++j) t.phi(r, j) /= s;
        continue;
      }
      // every draw underflowed; fall back to the posterior mean
    }
    const double denom = static_cast<double>(k) * a + total;
    for (std::size_t j = 0; j < k; ++j) t.phi(r, j) = (a + counts(r, j)) / denom;
  }
  return t;
}

inline TransitionMatrix estimate_transition_matrix(std::span<const Label> ref, std::span<const Label> noisy,
                                                   const DirichletPrior& prior, EstimatorMode mode, Rng& rng) {
  if (ref.size() != noisy.size()) throw ShapeError("estimate_transition_matrix: label vectors differ in length");
  const std::size_t k = prior.alpha.size();
  Matrix counts(k, k);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i] < 0 || noisy[i] < 0 || static_cast<std::size_t>(ref[i]) >= k || static_cast<std::size_t>(noisy[i]) >= k)
      throw RangeError("estimate_transition_matrix: label outside [0,K)");
    counts(ref[i], noisy[i]) += 1.0;
  }
  return estimate_from_counts(counts, prior, mode, rng);
}

/// The row vector prob_row * phi.
inline std::vector<double> transition_product(std::span<const double> prob_row, const TransitionMatrix& phi) {
  const std::size_t k = phi.num_classes();
  require_shape(prob_row.size() == k, "transition product: distribution length differs from K");
  std::vector<double> out(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    const double p = prob_row[a];
    if (p == 0.0) continue;
    for (std::size_t j = 0; j < k; ++j) out[j] += p * phi.phi(a, j);
  }
  return out;
}

/// argmax of prob_row * phi, ties toward the lowest class.
inline Label bayesian_step(std::span<const double> prob_row, const TransitionMatrix& phi) {
  return argmax(transition_product(prob_row, phi));
}

/// A label is uncertain when it moved since the last transition or disagrees
/// with the classifier's auto-generated label.
constexpr bool is_uncertain(Label z_t, Label z_prev, Label y_auto) noexcept { return z_t != z_prev || z_t != y_auto; }

/// Frequency of each class among the 1-hop neighbors of `node`; all zeros for
/// an isolated node.
inline std::vector<double> neighbor_label_distribution(const Graph& g, std::span<const Label> snapshot, NodeId node) {
  std::vector<double> d(g.num_classes(), 0.0);
  auto nb = g.neighbors(node);
  for (NodeId u : nb) d.at(snapshot[u]) += 1.0;
  if (!nb.empty())
    for (double& x : d) x /= static_cast<double>(nb.size());
  return d;
}

/// Draws a replacement label for `node` from its neighbors' labels.
/// Returns nullopt for nodes without neighbors.
inline std::optional<Label> sample_topology(const Graph& g, std::span<const Label> snapshot, NodeId node, Sampler kind,
                                            Rng& rng) {
  auto nb = g.neighbors(node);
  if (nb.empty()) return std::nullopt;
  switch (kind) {
    case Sampler::Random: {
      // picking a uniform neighbor realises the neighborhood label frequencies
      std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
      return snapshot[nb[pick(rng)]];
    }
    case Sampler::Major:
    case Sampler::Degree: {
      std::vector<double> score(g.num_classes(), 0.0);
      for (NodeId u : nb) score.at(snapshot[u]) += kind == Sampler::Major ? 1.0 : static_cast<double>(g.degree(u));
      return argmax(score);
    }
    case Sampler::GibbsVanilla: break;
  }
  throw ParameterError("sample_topology: gibbs sampler has no topology rule");
}

struct PassResult {
  Labels labels;  // aligned with the inference node list
  std::size_t uncertain = 0;
};

/// Inputs shared by every transition of one inference run.
struct TransitionContext {
  const Graph* graph = nullptr;      // the (perturbed) test graph
  std::span<const NodeId> nodes;     // inference nodes
  std::span<const Label> background;  // full-length labels used for non-inference neighbors
};

/// One transition over all inference nodes. Pass (a) takes the Bayesian label
/// for every node; pass (b) replaces uncertain labels with a topology sample
/// read from the post-(a) snapshot, so the result does not depend on node
/// order. The Gibbs sampler draws from the normalized product instead and
/// skips pass (b).
inline PassResult transition_pass(const TransitionContext& ctx, const CategoricalTable& probs,
                                  const TransitionMatrix& phi, std::span<const Label> previous,
                                  std::span<const Label> y_auto, Sampler sampler, SubstitutionSource source, Rng& rng) {
  const std::size_t m = ctx.nodes.size();
  require_shape(probs.rows() == m && previous.size() == m && y_auto.size() == m,
                "transition_pass: per-node inputs differ in length");
  PassResult r{Labels(m), 0};

  if (sampler == Sampler::GibbsVanilla) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
      auto w = transition_product(probs.row(i), phi);
      double total = 0.0;
      for (double x : w) total += x;
      double u = unif(rng) * total;
      Label z = static_cast<Label>(w.size() - 1);
      for (std::size_t j = 0; j < w.size(); ++j) {
        if (u < w[j]) {
          z = static_cast<Label>(j);
          break;
        }
        u -= w[j];
      }
      r.labels[i] = z;
      r.uncertain += is_uncertain(z, previous[i], y_auto[i]);
    }
    return r;
  }

  std::vector<char> flagged(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    r.labels[i] = bayesian_step(probs.row(i), phi);
    flagged[i] = is_uncertain(r.labels[i], previous[i], y_auto[i]);
    r.uncertain += flagged[i];
  }
  if (r.uncertain == 0) return r;

  Labels snapshot(ctx.background.begin(), ctx.background.end());
  for (std::size_t i = 0; i < m; ++i)
    snapshot[ctx.nodes[i]] = source == SubstitutionSource::Inferred ? r.labels[i] : y_auto[i];
  for (std::size_t i = 0; i < m; ++i) {
    if (!flagged[i]) continue;
    if (auto s = sample_topology(*ctx.graph, snapshot, ctx.nodes[i], sampler, rng)) r.labels[i] = *s;
  }
  return r;
}

/// alpha_k <- alpha_k * count_t(k) / count_prev(k); unchanged when class k is
/// absent from z_prev, then clamped below at `floor`.
inline DirichletPrior update_alpha(const DirichletPrior& prior, std::span<const Label> z_t, std::span<const Label> z_prev,
                                   double floor) {
  if (z_t.size() != z_prev.size()) throw ShapeError("update_alpha: label vectors differ in length");
  const std::size_t k = prior.alpha.size();
  std::vector<std::size_t> now(k, 0), before(k, 0);
  for (Label l : z_t) ++now.at(l);
  for (Label l : z_prev) ++before.at(l);
  DirichletPrior out = prior;
  for (std::size_t c = 0; c < k; ++c) {
    if (before[c] > 0) out.alpha[c] = prior.alpha[c] * static_cast<double>(now[c]) / static_cast<double>(before[c]);
    out.alpha[c] = std::max(out.alpha[c], floor);
  }
  return out;
}

struct TraceRecord {
  std::size_t t = 0;
  bool warmup = false;
  double val_acc = std::numeric_limits<double>::quiet_NaN();
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  double uncertain_ratio = 0.0;
  std::size_t changed = 0;  // nodes whose label differs from the previous transition
  double tv_prev = 0.0;
  double alpha_min = 0.0;
  double alpha_max = 0.0;
  double loop_seconds = 0.0;  // wall time of the transition itself, not written to CSV
};

/// Everything an inference run reads. Label vectors are full-length.
struct InferenceProblem {
  const Graph* g_train = nullptr;  // clean graph the classifier was trained on
  const Graph* g_test = nullptr;   // possibly perturbed graph to infer on
  NodeSet train_nodes;
  NodeSet nodes;  // inference (victim) nodes
  Labels y_manual;
  // optional ground truth for the trace accuracies
  NodeSet val_nodes;
  NodeSet test_nodes;
  Labels truth;
};

struct InferenceState {
  Labels inferred;  // aligned with problem.nodes
  Labels previous;
  Labels y_auto;
  DirichletPrior alpha;
  TransitionMatrix phi_dynamic;
  std::size_t t = 0;
  std::vector<TraceRecord> trace;
};

struct InferenceResult {
  InferenceState state;
  TransitionMatrix phi_warmup;
  Labels initial_auto;  // classifier labels before inference, aligned with nodes
  CategoricalTable initial_table;
  CategoricalTable final_table;
  GcnModel model;

  /// Inferred labels scattered into a full-length vector.
  Labels full_labels(std::size_t n, std::span<const NodeId> nodes) const {
    Labels out(n, kNoLabel);
    for (std::size_t i = 0; i < nodes.size(); ++i) out[nodes[i]] = state.inferred[i];
    return out;
  }
};

namespace inference_detail {

inline double subset_accuracy(std::span<const NodeId> nodes, std::span<const Label> inferred, std::span<const NodeId> subset,
                              std::span<const Label> truth) {
  if (subset.empty() || truth.empty()) return std::numeric_limits<double>::quiet_NaN();
  // nodes and subset are sorted
  std::size_t hit = 0, seen = 0, i = 0;
  for (NodeId v : subset) {
    while (i < nodes.size() && nodes[i] < v) ++i;
    if (i == nodes.size() || nodes[i] != v) continue;
    ++seen;
    hit += inferred[i] == truth[v];
  }
  return seen ? static_cast<double>(hit) / static_cast<double>(seen) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace inference_detail

/// Full inference loop. `model` is the classifier trained on the clean graph;
/// a copy is retrained as inference proceeds and returned in the result.
inline InferenceResult infer(const InferenceProblem& pb, GcnModel model, const TrainConfig& train_cfg,
                             const InferenceConfig& cfg) {
  cfg.validate();
  if (!pb.g_train || !pb.g_test) throw ParameterError("infer: missing graph");
  if (!std::is_sorted(pb.nodes.begin(), pb.nodes.end())) throw ParameterError("infer: inference nodes must be sorted");
  if (pb.nodes.empty()) throw ParameterError("infer: empty inference node set");
  const Graph& gt = *pb.g_test;
  const std::size_t k = gt.num_classes();
  const std::size_t n = gt.num_nodes();
  if (pb.y_manual.size() != n) throw ShapeError("infer: manual label vector length differs from node count");
  Rng rng(cfg.seed);

  InferenceResult res;
  auto initial = predict(model, gt, pb.nodes);
  res.initial_table = initial.table;
  res.initial_auto = initial.labels;

  // warm-up transition matrix from classifier output vs manual labels on the train graph
  auto train_pred = predict(model, *pb.g_train, pb.train_nodes);
  DirichletPrior alpha0 = DirichletPrior::uniform(k, cfg.initial_alpha);
  Matrix counts(k, k);
  for (std::size_t i = 0; i < pb.train_nodes.size(); ++i) {
    const Label y = pb.y_manual[pb.train_nodes[i]];
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw RangeError("infer: manual label outside [0,K)");
    if (cfg.warmup_counts == WarmupCounts::Argmax) {
      counts(train_pred.labels[i], y) += 1.0;
    } else {
      for (std::size_t a = 0; a < k; ++a) counts(a, y) += train_pred.table.probs(i, a);
    }
  }
  res.phi_warmup = estimate_from_counts(counts, alpha0, cfg.estimator, rng);

  InferenceState& st = res.state;
  st.y_auto = initial.labels;
  st.inferred = initial.labels;
  st.alpha = alpha0;
  st.phi_dynamic = estimate_transition_matrix(st.y_auto, st.inferred, st.alpha, cfg.estimator, rng);

  // non-inference neighbors keep their manual label, or the classifier's when unlabeled
  Labels background = pb.y_manual;
  if (std::any_of(background.begin(), background.end(), [](Label l) { return l == kNoLabel; })) {
    NodeSet every(n);
    std::iota(every.begin(), every.end(), NodeId{0});
    auto full = predict(model, gt, every);
    for (std::size_t v = 0; v < n; ++v)
      if (background[v] == kNoLabel) background[v] = full.labels[v];
  }
  TransitionContext ctx{&gt, pb.nodes, background};
  CategoricalTable table = initial.table;

  for (std::size_t t = 1; t <= cfg.num_transitions; ++t) {
    TraceRecord rec;
    rec.t = t;
    rec.warmup = t <= cfg.warmup_steps;
    const auto start = std::chrono::steady_clock::now();

    const TransitionMatrix& phi = rec.warmup ? res.phi_warmup : st.phi_dynamic;
    auto pass = transition_pass(ctx, table, phi, st.inferred, st.y_auto, cfg.sampler, cfg.substitution, rng);
    st.previous = std::move(st.inferred);
    st.inferred = std::move(pass.labels);
    if (cfg.dynamic_alpha) st.alpha = update_alpha(st.alpha, st.inferred, st.previous, cfg.alpha_floor);
    st.phi_dynamic = estimate_transition_matrix(st.y_auto, st.inferred, st.alpha, cfg.estimator, rng);

    rec.loop_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.uncertain_ratio = static_cast<double>(pass.uncertain) / static_cast<double>(pb.nodes.size());
    for (std::size_t i = 0; i < st.inferred.size(); ++i) rec.changed += st.inferred[i] != st.previous[i];
    rec.tv_prev = total_variation(label_distribution(st.inferred, k), label_distribution(st.previous, k));
    rec.alpha_min = st.alpha.min();
    rec.alpha_max = st.alpha.max();
    rec.val_acc = inference_detail::subset_accuracy(pb.nodes, st.inferred, pb.val_nodes, pb.truth);
    rec.test_acc = inference_detail::subset_accuracy(pb.nodes, st.inferred, pb.test_nodes, pb.truth);
    st.t = t;
    st.trace.push_back(rec);

    if (t % cfg.retrain_interval == 0 && cfg.retrain_epochs > 0) {
      Labels targets(n, kNoLabel);
      for (std::size_t i = 0; i < pb.nodes.size(); ++i) targets[pb.nodes[i]] = st.inferred[i];
      model = retrain(std::move(model), gt, targets, pb.nodes, cfg.retrain_epochs, train_cfg);
      auto refreshed = predict(model, gt, pb.nodes);
      table = std::move(refreshed.table);
      if (cfg.refresh_auto_labels) st.y_auto = std::move(refreshed.labels);
    }
  }
  res.final_table = std::move(table);
  res.model = std::move(model);
  return res;
}

inline void write_trace_csv(std::span<const TraceRecord> trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "t,phase,val_acc,test_acc,uncertain_ratio,tv_prev,alpha_min,alpha_max\n";
  char buf[256];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.t, r.warmup ? "warmup" : "dynamic",
                  r.val_acc, r.test_acc, r.uncertain_ratio, r.tv_prev, r.alpha_min, r.alpha_max);
    out << buf;
  }
}

}  // namespace lindt
