// lindt: command-line front end.
//
//   lindt synth    --seed S --out DIR           write an SBM graph directory
//   lindt train    --graph DIR --seed S --out FILE
//   lindt perturb  --graph DIR --scenario NAME --seed S --out DIR
//   lindt infer    --graph DIR --model FILE --seed S --out DIR
//   lindt eval     --pred FILE --truth FILE --out FILE
//   lindt scenario --graph DIR --seed S --out DIR
//
// Every subcommand accepts --config FILE with key=value lines; explicit flags
// override the file. Exit status: 0 success, 1 invalid input, 2 usage error.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lindt/graph_io.hpp"
#include "lindt/lindt.hpp"

namespace fs = std::filesystem;
using namespace lindt;

namespace {

const std::map<std::string, EstimatorMode> kEstimators{{"posterior_mean", EstimatorMode::PosteriorMean},
                                                       {"dirichlet_sample", EstimatorMode::DirichletSample}};
const std::map<std::string, WarmupCounts> kWarmupCounts{{"argmax", WarmupCounts::Argmax},
                                                        {"expected", WarmupCounts::Expected}};
const std::map<std::string, SubstitutionSource> kSubstitution{{"inferred", SubstitutionSource::Inferred},
                                                              {"auto", SubstitutionSource::Auto}};

struct TrainFlags {
  TrainConfig cfg;
};

struct InferFlags {
  InferenceConfig cfg;
  std::string sampler = "major";
  std::string estimator = "posterior_mean";
  std::string warmup_counts = "argmax";
  std::string substitution = "inferred";

  InferenceConfig resolve(std::uint64_t seed) const {
    InferenceConfig c = cfg;
    c.sampler = parse_sampler(sampler);
    c.estimator = kEstimators.at(estimator);
    c.warmup_counts = kWarmupCounts.at(warmup_counts);
    c.substitution = kSubstitution.at(substitution);
    c.seed = seed;
    return c;
  }
};

struct PerturbFlags {
  PerturbationSpec spec;
  std::string scenario = "rdmPert";

  PerturbationSpec resolve(std::uint64_t seed) const {
    PerturbationSpec s = spec;
    s.scenario = parse_scenario(scenario);
    s.seed = seed;
    return s;
  }
};

// flags carry their default so the printed configuration replays correctly
void bool_flag(CLI::App* app, const std::string& names, bool& target, const std::string& help) {
  app->add_flag(names, target, help)->default_str(target ? "true" : "false");
}

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--lr", f.cfg.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  app->add_option("--epochs", f.cfg.max_epochs, "training epochs")->check(CLI::PositiveNumber);
  app->add_option("--hidden", f.cfg.hidden_units, "hidden units")->check(CLI::PositiveNumber);
}

void add_infer_flags(CLI::App* app, InferFlags& f) {
  app->add_option("--sampler", f.sampler, "topology sampler")
      ->check(CLI::IsMember({"gibbs", "gibbs_vanilla", "random", "major", "degree"}));
  app->add_option("--ws", f.cfg.warmup_steps, "warm-up transitions");
  app->add_option("--t", f.cfg.num_transitions, "total transitions")->check(CLI::PositiveNumber);
  app->add_option("--alpha", f.cfg.initial_alpha, "initial Dirichlet concentration")->check(CLI::PositiveNumber);
  bool_flag(app, "--dynamic-alpha,!--no-dynamic-alpha", f.cfg.dynamic_alpha, "rescale alpha by label counts");
  app->add_option("--alpha-floor", f.cfg.alpha_floor, "lower bound on alpha")->check(CLI::PositiveNumber);
  app->add_option("--retrain-interval", f.cfg.retrain_interval, "transitions between retraining")
      ->check(CLI::PositiveNumber);
  app->add_option("--retrain-epochs", f.cfg.retrain_epochs, "epochs per retraining");
  app->add_option("--estimator", f.estimator, "transition matrix estimator")
      ->check(CLI::IsMember({"posterior_mean", "dirichlet_sample"}));
  app->add_option("--warmup-counts", f.warmup_counts, "warm-up count mode")->check(CLI::IsMember({"argmax", "expected"}));
  app->add_option("--substitution", f.substitution, "labels read by the topology sampler")
      ->check(CLI::IsMember({"inferred", "auto"}));
  bool_flag(app, "--refresh-auto,!--no-refresh-auto", f.cfg.refresh_auto_labels,
            "re-derive auto labels after retraining");
}

void add_perturb_flags(CLI::App* app, PerturbFlags& f) {
  app->add_option("--scenario", f.scenario, "perturbation scenario")
      ->check(CLI::IsMember({"none", "rdmPert", "infoSparse", "advAttack"}));
  auto& s = f.spec;
  app->add_option("--perturbator-fraction", s.perturbator_fraction)->check(CLI::Range(0.0, 1.0));
  app->add_option("--connections", s.connections_per_perturbator, "edges added per perturbator");
  app->add_option("--link-sparsity", s.link_sparsity)->check(CLI::Range(0.0, 1.0));
  app->add_option("--feature-sparsity", s.feature_sparsity)->check(CLI::Range(0.0, 1.0));
  app->add_option("--pert-links", s.n_pert_links, "edge flips per attacked node");
  app->add_option("--pert-features", s.n_pert_features, "feature flips per attacked node");
  app->add_option("--degree-low", s.degree_low, "exclusive lower degree bound for attack targets");
  app->add_option("--degree-high", s.degree_high, "exclusive upper degree bound for attack targets");
  bool_flag(app, "--presparsify,!--no-presparsify", s.presparsify, "sparsify links before attacking");
  app->add_option("--addition-candidates", s.addition_candidates);
  app->add_option("--feature-candidates", s.feature_candidates);
}

void print_config(const CLI::App* app) {
  std::cout << "# " << app->get_name() << " configuration\n" << app->config_to_str(true, false) << std::flush;
}

struct LoadedGraph {
  Graph graph;
  NodeSplit split;
};

LoadedGraph load_graph_dir(const fs::path& dir, bool need_splits = true) {
  GraphFiles files{dir};
  auto r = load_graph(files.edges(), files.features(), files.labels());
  if (r.self_loops_dropped || r.duplicate_edges)
    std::cerr << "note: dropped " << r.self_loops_dropped << " self-loops, " << r.duplicate_edges
              << " duplicate edges\n";
  LoadedGraph lg{std::move(r.graph), {}};
  if (need_splits) lg.split = read_splits(files.splits(), lg.graph.num_nodes());
  return lg;
}

/// Manual labels: an explicit file, else noisy_labels.txt next to the graph, else labels.txt.
Labels manual_labels(const fs::path& dir, const std::string& explicit_path, std::size_t n) {
  std::string path = explicit_path;
  if (path.empty()) {
    const auto noisy = dir / "noisy_labels.txt";
    path = fs::exists(noisy) ? noisy.string() : GraphFiles{dir}.labels();
  }
  auto lf = read_labels(path);
  if (lf.num_nodes != n) throw ParameterError("label file '" + path + "' does not match the graph size");
  return lf.labels;
}

/// Splices `--config FILE` into the argument list: every key=value line
/// becomes --key=value unless that flag was given explicitly.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  auto given = [&args](const std::string& key) {
    const std::string flag = "--" + key, negated = "--no-" + key;
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a == negated || a.rfind(flag + "=", 0) == 0;
    });
  };
  auto trim = [](std::string v) {
    const auto b = v.find_first_not_of(" \t\r"), e = v.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
  };
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config file '" + path + "': expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    // an empty value means the flag's default
    if (key != "config" && !value.empty() && !given(key)) args.push_back("--" + key + "=" + value);
  }
  return args;
}

void copy_if_exists(const fs::path& from, const fs::path& to) {
  if (fs::exists(from)) fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LInDT: robust node classification by Bayesian label transition"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::uint64_t seed = 0;
  std::string config_file;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key=value file of default flags")->configurable(false);
  };
  auto add_seed = [&seed](CLI::App* sub) { sub->add_option("--seed", seed, "random seed")->required(); };

  // synth
  auto* synth = app.add_subcommand("synth", "generate a stochastic block model graph");
  add_common(synth);
  SbmParams sbm;
  double tr = 0.1, va = 0.2, te = 0.7, noise = 0.0;
  std::string synth_out = ".";
  synth->add_option("--n", sbm.n, "number of nodes");
  synth->add_option("--k", sbm.k, "number of classes");
  synth->add_option("--p-intra", sbm.p_intra, "intra-block edge probability");
  synth->add_option("--p-inter", sbm.p_inter, "inter-block edge probability");
  synth->add_option("--feat-dim", sbm.feat_dim, "feature width");
  synth->add_option("--feat-signal", sbm.feat_signal, "probability of an in-band feature");
  synth->add_option("--train", tr, "train fraction");
  synth->add_option("--val", va, "validation fraction");
  synth->add_option("--test", te, "test fraction");
  synth->add_option("--noise", noise, "label noise ratio on train nodes")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--out", synth_out, "output directory");
  add_seed(synth);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the GCN on the train split");
  add_common(train_cmd);
  TrainFlags train_flags;
  std::string train_graph, train_labels, train_out;
  train_cmd->add_option("--graph", train_graph, "graph directory")->required();
  train_cmd->add_option("--labels", train_labels, "manual label file (default: noisy_labels.txt or labels.txt)");
  train_cmd->add_option("--out", train_out, "checkpoint path")->required();
  add_train_flags(train_cmd, train_flags);
  add_seed(train_cmd);

  // perturb
  auto* perturb_cmd = app.add_subcommand("perturb", "perturb the victim nodes of a graph");
  add_common(perturb_cmd);
  PerturbFlags perturb_flags;
  std::string perturb_graph, perturb_model, perturb_out;
  perturb_cmd->add_option("--graph", perturb_graph, "graph directory")->required();
  perturb_cmd->add_option("--model", perturb_model, "checkpoint, required for advAttack");
  perturb_cmd->add_option("--out", perturb_out, "output graph directory")->required();
  add_perturb_flags(perturb_cmd, perturb_flags);
  add_seed(perturb_cmd);

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "infer labels of the victim nodes");
  add_common(infer_cmd);
  InferFlags infer_flags;
  TrainFlags infer_train;
  std::string infer_graph, infer_test_graph, infer_model, infer_labels, infer_out;
  infer_cmd->add_option("--graph", infer_graph, "clean graph directory the model was trained on")->required();
  infer_cmd->add_option("--test-graph", infer_test_graph, "graph to infer on (default: --graph)");
  infer_cmd->add_option("--model", infer_model, "checkpoint")->required();
  infer_cmd->add_option("--labels", infer_labels, "manual label file (default: noisy_labels.txt or labels.txt)");
  infer_cmd->add_option("--out", infer_out, "output directory")->required();
  add_infer_flags(infer_cmd, infer_flags);
  infer_cmd->add_option("--lr", infer_train.cfg.learning_rate, "learning rate used when retraining")
      ->check(CLI::PositiveNumber);
  add_seed(infer_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score predicted labels against the truth");
  add_common(eval_cmd);
  std::string eval_pred, eval_truth, eval_out, eval_splits, eval_subset = "all", eval_name = "none", eval_phase = "eval";
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--pred", eval_pred, "predicted label file")->required();
  eval_cmd->add_option("--truth", eval_truth, "ground-truth label file")->required();
  eval_cmd->add_option("--out", eval_out, "report CSV path")->required();
  eval_cmd->add_option("--splits", eval_splits, "splits file, needed for --subset");
  eval_cmd->add_option("--subset", eval_subset, "nodes to score")
      ->check(CLI::IsMember({"all", "train", "val", "test", "victims"}));
  eval_cmd->add_option("--scenario", eval_name, "scenario column value");
  eval_cmd->add_option("--phase", eval_phase, "phase column value");
  eval_cmd->add_option("--seed", eval_seed, "seed column value");

  // scenario
  auto* scen_cmd = app.add_subcommand("scenario", "train, perturb, infer and report in one run");
  add_common(scen_cmd);
  PerturbFlags scen_perturb;
  InferFlags scen_infer;
  TrainFlags scen_train;
  std::string scen_graph, scen_labels, scen_out;
  double scen_noise = 0.0;
  bool timing = false;
  scen_cmd->add_option("--graph", scen_graph, "graph directory with splits.txt")->required();
  scen_cmd->add_option("--labels", scen_labels, "manual label file (default: noisy_labels.txt or labels.txt)");
  scen_cmd->add_option("--noise", scen_noise, "extra label noise injected on train nodes")->check(CLI::Range(0.0, 1.0));
  scen_cmd->add_option("--out", scen_out, "output directory")->required();
  bool_flag(scen_cmd, "--timing", timing, "record wall time in the report");
  add_perturb_flags(scen_cmd, scen_perturb);
  add_train_flags(scen_cmd, scen_train);
  add_infer_flags(scen_cmd, scen_infer);
  add_seed(scen_cmd);

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      print_config(synth);
      sbm.seed = seed;
      Graph g = generate_sbm(sbm);
      NodeSplit split = split_nodes(sbm.n, tr, va, te, seed);
      write_graph_dir(g, synth_out);
      GraphFiles files{synth_out};
      write_splits(split, files.splits());
      if (noise > 0.0) {
        Labels noisy(sbm.n, kNoLabel);
        auto flipped = inject_label_noise(*g.latent_labels(), noise, sbm.k, split.train, seed);
        for (NodeId v : split.train) noisy[v] = flipped[v];
        write_labels(noisy, sbm.k, (fs::path(synth_out) / "noisy_labels.txt").string());
      }
      std::printf("nodes=%zu edges=%zu classes=%zu EHR=%.4f\n", g.num_nodes(), g.num_edges(), g.num_classes(),
                  g.num_edges() ? edge_homophily_ratio(g, *g.latent_labels()) : 0.0);
    } else if (train_cmd->parsed()) {
      print_config(train_cmd);
      auto lg = load_graph_dir(train_graph);
      Labels y = manual_labels(train_graph, train_labels, lg.graph.num_nodes());
      TrainConfig cfg = train_flags.cfg;
      cfg.seed = seed;
      auto r = train_on(lg.graph, lg.split.train, y, cfg);
      save_model(r.model, train_out);
      auto pred = predict(r.model, lg.graph, lg.split.train);
      std::size_t hit = 0;
      for (std::size_t i = 0; i < lg.split.train.size(); ++i) hit += pred.labels[i] == y[lg.split.train[i]];
      std::printf("final_loss=%.6f train_acc=%.4f\n", r.losses.back(),
                  static_cast<double>(hit) / static_cast<double>(lg.split.train.size()));
    } else if (perturb_cmd->parsed()) {
      print_config(perturb_cmd);
      auto lg = load_graph_dir(perturb_graph);
      const PerturbationSpec spec = perturb_flags.resolve(seed);
      std::optional<GcnModel> model;
      if (!perturb_model.empty()) model = load_model(perturb_model);
      auto r = perturb(lg.graph, model ? &*model : nullptr, lg.split.victims(), spec);
      write_graph_dir(r.graph, perturb_out);
      copy_if_exists(GraphFiles{perturb_graph}.splits(), GraphFiles{perturb_out}.splits());
      copy_if_exists(fs::path(perturb_graph) / "noisy_labels.txt", fs::path(perturb_out) / "noisy_labels.txt");
      write_manifest(r, spec, (fs::path(perturb_out) / "manifest.csv").string());
      std::printf("targets=%zu perturbators=%zu edges=%zu->%zu capped=%zu\n", r.targets.size(), r.perturbators.size(),
                  lg.graph.num_edges(), r.graph.num_edges(), r.capped);
    } else if (infer_cmd->parsed()) {
      print_config(infer_cmd);
      auto clean = load_graph_dir(infer_graph);
      Graph test_graph = infer_test_graph.empty() ? clean.graph : load_graph_dir(infer_test_graph, false).graph;
      GcnModel model = load_model(infer_model);
      InferenceProblem pb;
      pb.g_train = &clean.graph;
      pb.g_test = &test_graph;
      pb.train_nodes = clean.split.train;
      pb.nodes = clean.split.victims();
      Labels manual = manual_labels(infer_graph, infer_labels, clean.graph.num_nodes());
      pb.y_manual.assign(clean.graph.num_nodes(), kNoLabel);
      for (NodeId v : pb.train_nodes) pb.y_manual[v] = manual[v];
      pb.val_nodes = clean.split.val;
      pb.test_nodes = clean.split.test;
      if (clean.graph.latent_labels()) pb.truth = *clean.graph.latent_labels();
      auto r = infer(pb, std::move(model), infer_train.cfg, infer_flags.resolve(seed));
      fs::create_directories(infer_out);
      write_labels(r.full_labels(clean.graph.num_nodes(), pb.nodes), clean.graph.num_classes(),
                   (fs::path(infer_out) / "labels.txt").string());
      write_trace_csv(r.state.trace, (fs::path(infer_out) / "trace.csv").string());
      const auto& last = r.state.trace.back();
      std::printf("transitions=%zu uncertain_ratio=%.4f\n", last.t, last.uncertain_ratio);
    } else if (eval_cmd->parsed()) {
      print_config(eval_cmd);
      auto pred = read_labels(eval_pred);
      auto truth = read_labels(eval_truth);
      if (pred.num_nodes != truth.num_nodes) throw ParameterError("eval: label files differ in node count");
      NodeSet nodes;
      if (eval_subset == "all") {
        for (NodeId v = 0; v < pred.num_nodes; ++v)
          if (pred.labels[v] != kNoLabel && truth.labels[v] != kNoLabel) nodes.push_back(v);
      } else {
        if (eval_splits.empty()) throw ParameterError("eval: --subset needs --splits");
        auto s = read_splits(eval_splits, pred.num_nodes);
        nodes = eval_subset == "train" ? s.train : eval_subset == "val" ? s.val : eval_subset == "test" ? s.test : s.victims();
      }
      EvalReport rep;
      rep.scenario = eval_name;
      rep.seed = eval_seed;
      rep.phase = eval_phase;
      rep.accuracy = accuracy(pred.labels, truth.labels, nodes);
      rep.avg_norm_entropy = std::nan("");
      rep.node_set_size = nodes.size();
      write_report_csv(std::vector<EvalReport>{rep}, eval_out);
      std::printf("acc=%.6f n=%zu\n", rep.accuracy, nodes.size());
    } else if (scen_cmd->parsed()) {
      print_config(scen_cmd);
      auto lg = load_graph_dir(scen_graph);
      Labels y = manual_labels(scen_graph, scen_labels, lg.graph.num_nodes());
      if (scen_noise > 0.0) y = inject_label_noise(y, scen_noise, lg.graph.num_classes(), lg.split.train, seed);
      ScenarioConfig cfg;
      cfg.perturbation = scen_perturb.resolve(seed);
      cfg.train = scen_train.cfg;
      cfg.train.seed = seed;
      cfg.inference = scen_infer.resolve(seed);
      cfg.seed = seed;
      cfg.record_runtime = timing;
      cfg.output_dir = scen_out;
      auto out = run_scenario(lg.graph, lg.split, y, cfg);
      for (const auto& r : out.reports)
        std::printf("%s acc=%.4f ent=%.4f n=%zu\n", r.phase.c_str(), r.accuracy, r.avg_norm_entropy, r.node_set_size);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
