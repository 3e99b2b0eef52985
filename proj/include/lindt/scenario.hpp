#pragma once

// End-to-end experiment: train on the clean graph, perturb the victims,
// report the classifier before inference and the inferred labels after.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lindt/gcn.hpp"
#include "lindt/graph.hpp"
#include "lindt/inference.hpp"
#include "lindt/metrics.hpp"
#include "lindt/perturbation.hpp"

namespace lindt {

struct EvalReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string phase;
  double accuracy = 0.0;
  double avg_norm_entropy = 0.0;  // NaN: no probabilities available
  std::size_t node_set_size = 0;
  double runtime_s = -1.0;  // negative: not recorded
};

inline void write_report_csv(std::span<const EvalReport> rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "scenario,seed,phase,acc,ent,n_nodes,runtime_s\n";
  char buf[512];
  for (const auto& r : rows) {
    char rt[64] = "NA", ent[64] = "NA";
    if (r.runtime_s >= 0.0) std::snprintf(rt, sizeof(rt), "%.6f", r.runtime_s);
    if (!std::isnan(r.avg_norm_entropy)) std::snprintf(ent, sizeof(ent), "%.6f", r.avg_norm_entropy);
    std::snprintf(buf, sizeof(buf), "%s,%llu,%s,%.6f,%s,%zu,%s\n", r.scenario.c_str(),
                  static_cast<unsigned long long>(r.seed), r.phase.c_str(), r.accuracy, ent, r.node_set_size, rt);
    out << buf;
  }
}

/// First row lists the class indices, then one row of counts per truth class.
inline void write_confusion_csv(const std::vector<std::vector<std::size_t>>& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < c.size(); ++j) out << (j ? "," : "") << j;
  out << '\n';
  for (const auto& row : c) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  }
}

struct ScenarioConfig {
  PerturbationSpec perturbation;
  TrainConfig train;
  InferenceConfig inference;
  std::uint64_t seed = 0;  // reported in the CSV
  bool record_runtime = false;
  std::filesystem::path output_dir;  // empty: write nothing
};

struct ScenarioOutcome {
  EvalReport before;
  EvalReport after;
  std::vector<EvalReport> reports;  // before/after plus any extra reporting subsets
  GcnModel model;                   // classifier trained on the clean graph
  PerturbationResult perturbation;
  InferenceResult inference;
  Labels predicted;  // full-length classifier labels on the perturbed graph
  Labels inferred;   // full-length inferred labels
};

namespace scenario_detail {

inline std::vector<std::size_t> rows_of(std::span<const NodeId> nodes, std::span<const NodeId> subset) {
  std::vector<std::size_t> rows;
  rows.reserve(subset.size());
  for (NodeId v : subset) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
    if (it == nodes.end() || *it != v) throw ParameterError("scenario: reporting node outside the inference set");
    rows.push_back(static_cast<std::size_t>(it - nodes.begin()));
  }
  return rows;
}

}  // namespace scenario_detail

/// `noisy_labels` is a full-length vector holding the (noisy) manual labels on
/// the train nodes. Ground truth comes from g.latent_labels().
inline ScenarioOutcome run_scenario(const Graph& g, const NodeSplit& split, std::span<const Label> noisy_labels,
                                    const ScenarioConfig& cfg) {
  if (!g.latent_labels()) throw ParameterError("run_scenario: graph has no ground-truth labels");
  const Labels& truth = *g.latent_labels();
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  ScenarioOutcome out;
  out.model = train(g, split, noisy_labels, cfg.train);
  const NodeSet victims = split.victims();
  out.perturbation = perturb(g, &out.model, victims, cfg.perturbation);
  const Graph& gp = out.perturbation.graph;
  const NodeSet& targets = out.perturbation.targets;

  InferenceProblem pb;
  pb.g_train = &g;
  pb.g_test = &gp;
  pb.train_nodes = split.train;
  pb.nodes = victims;
  pb.y_manual.assign(g.num_nodes(), kNoLabel);
  for (NodeId v : split.train) pb.y_manual[v] = noisy_labels[v];
  pb.val_nodes = split.val;
  pb.test_nodes = split.test;
  pb.truth = truth;
  const double t_before = elapsed();
  out.inference = infer(pb, out.model, cfg.train, cfg.inference);

  out.predicted.assign(g.num_nodes(), kNoLabel);
  for (std::size_t i = 0; i < victims.size(); ++i) out.predicted[victims[i]] = out.inference.initial_auto[i];
  out.inferred = out.inference.full_labels(g.num_nodes(), victims);

  const std::string name(to_string(cfg.perturbation.scenario));
  auto report = [&](const std::string& phase, std::span<const Label> labels, const CategoricalTable& table,
                    std::span<const NodeId> subset, double runtime) {
    EvalReport r;
    r.scenario = name;
    r.seed = cfg.seed;
    r.phase = phase;
    r.node_set_size = subset.size();
    if (!subset.empty()) {
      r.accuracy = accuracy(labels, truth, subset);
      r.avg_norm_entropy = avg_normalized_entropy(table, scenario_detail::rows_of(victims, subset));
    }
    r.runtime_s = cfg.record_runtime ? runtime : -1.0;
    return r;
  };
  out.before = report("original", out.predicted, out.inference.initial_table, targets, t_before);
  out.after = report("lindt", out.inferred, out.inference.final_table, targets, elapsed());
  out.reports = {out.before, out.after};
  if (!out.perturbation.perturbators.empty()) {
    NodeSet rest;
    std::set_difference(targets.begin(), targets.end(), out.perturbation.perturbators.begin(),
                        out.perturbation.perturbators.end(), std::back_inserter(rest));
    out.reports.push_back(report("original_excl_perturbators", out.predicted, out.inference.initial_table, rest, t_before));
    out.reports.push_back(report("lindt_excl_perturbators", out.inferred, out.inference.final_table, rest, elapsed()));
  }

  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    write_trace_csv(out.inference.state.trace, (cfg.output_dir / "trace.csv").string());
    write_report_csv(out.reports, (cfg.output_dir / "report.csv").string());
    const std::size_t k = g.num_classes();
    write_confusion_csv(confusion_matrix(truth, out.predicted, targets, k),
                        (cfg.output_dir / "confusion_original.csv").string());
    write_confusion_csv(confusion_matrix(truth, out.inferred, targets, k),
                        (cfg.output_dir / "confusion_inferred.csv").string());
  }
  return out;
}

}  // namespace lindt
