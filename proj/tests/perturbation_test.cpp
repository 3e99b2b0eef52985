#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "lindt/perturbation.hpp"
#include "test_support.hpp"

namespace lindt {
namespace {

double mean_degree(const Graph& g, const NodeSet& nodes) {
  double s = 0.0;
  for (NodeId v : nodes) s += static_cast<double>(g.degree(v));
  return s / static_cast<double>(nodes.size());
}

bool well_formed(const Graph& g) {
  for (std::size_t v = 0; v < g.num_nodes(); ++v)
    for (NodeId u : g.neighbors(v))
      if (u == v || !g.has_edge(u, v)) return false;
  return true;
}

TEST(RandomPerturbationTest, CoraSizedArithmetic) {
  const std::size_t n = 2708;
  Graph g(NeighborLists(n), Matrix(n, 1), 7);
  auto split = split_nodes(n, 0.1, 0.2, 0.7, 1);
  PerturbationSpec spec{.scenario = Scenario::RdmPert, .seed = 3};
  auto r = random_perturbation(g, split.test, spec);
  EXPECT_EQ(split.test.size(), 1895u);
  EXPECT_EQ(r.perturbators.size(), 19u);
  EXPECT_EQ(r.graph.num_edges(), 1900u);
  EXPECT_EQ(r.capped, 0u);
  for (NodeId p : r.perturbators) {
    EXPECT_GE(r.graph.degree(p), 100u);
    EXPECT_TRUE(std::binary_search(split.test.begin(), split.test.end(), p));
  }
  // every new edge stays inside the victim set
  for (auto [u, v] : r.graph.edge_list()) {
    EXPECT_TRUE(std::binary_search(split.test.begin(), split.test.end(), u));
    EXPECT_TRUE(std::binary_search(split.test.begin(), split.test.end(), v));
  }
}

TEST(RandomPerturbationTest, ZeroConnectionsIsIdentity) {
  auto g = testing::random_graph(60, 0.05, 3, 3, 1);
  NodeSet victims(40);
  std::iota(victims.begin(), victims.end(), NodeId{20});
  auto r = random_perturbation(g, victims, {.connections_per_perturbator = 0});
  EXPECT_EQ(r.graph, g);
}

TEST(RandomPerturbationTest, VictimDegreeIncreasesAndTrainUntouched) {
  auto g = generate_sbm({.n = 300, .k = 3, .p_intra = 0.05, .p_inter = 0.005, .feat_dim = 9, .seed = 2});
  auto split = split_nodes(300, 0.1, 0.2, 0.7, 2);
  auto victims = split.victims();
  auto r = random_perturbation(g, victims, {.connections_per_perturbator = 20, .seed = 2});
  EXPECT_GT(mean_degree(r.graph, victims), mean_degree(g, victims));
  for (NodeId v : split.train) {
    ASSERT_EQ(r.graph.degree(v), g.degree(v));
    for (std::size_t f = 0; f < g.feature_dim(); ++f) ASSERT_EQ(r.graph.features()(v, f), g.features()(v, f));
  }
  EXPECT_TRUE(well_formed(r.graph));
  EXPECT_EQ(r.graph, random_perturbation(g, victims, {.connections_per_perturbator = 20, .seed = 2}).graph);
}

TEST(RandomPerturbationTest, CapsWhenVictimsRunOut) {
  auto g = testing::random_graph(10, 0.0, 2, 2, 1);
  NodeSet victims{0, 1, 2, 3};
  auto r = random_perturbation(g, victims, {.perturbator_fraction = 0.25, .connections_per_perturbator = 100});
  EXPECT_EQ(r.perturbators.size(), 1u);
  EXPECT_EQ(r.capped, 1u);
  EXPECT_EQ(r.graph.degree(r.perturbators[0]), 3u);
}

TEST(SparsifyTest, ZeroSparsityIsIdentity) {
  auto g = testing::random_graph(30, 0.2, 4, 2, 3);
  auto r = sparsify(g, NodeSet{1, 2, 3, 4}, {.link_sparsity = 0.0, .feature_sparsity = 0.0});
  EXPECT_EQ(r.graph, g);
}

TEST(SparsifyTest, FullFeatureSparsityZeroesRows) {
  auto g = testing::random_graph(30, 0.2, 6, 2, 3);
  NodeSet victims{0, 5, 9};
  auto r = sparsify(g, victims, {.link_sparsity = 0.0, .feature_sparsity = 1.0});
  for (NodeId v : victims)
    for (double x : r.graph.features().row(v)) EXPECT_EQ(x, 0.0);
  for (double x : r.graph.features().row(1)) EXPECT_NE(x, 0.0);
}

TEST(SparsifyTest, DegreeTenKeepsOneEdge) {
  std::vector<std::pair<NodeId, NodeId>> star;
  for (NodeId u = 1; u <= 10; ++u) star.emplace_back(0, u);
  auto g = Graph::from_edges(11, star, Matrix(11, 2), 2);
  auto r = sparsify(g, NodeSet{0}, {.link_sparsity = 0.9, .feature_sparsity = 0.0, .seed = 4});
  EXPECT_EQ(r.graph.degree(0), 1u);
  EXPECT_EQ(r.changes[0].edges_removed, 9u);
  EXPECT_TRUE(well_formed(r.graph));
}

TEST(DispatchTest, ParseAndNone) {
  EXPECT_EQ(parse_scenario("advAttack"), Scenario::AdvAttack);
  EXPECT_THROW(parse_scenario("nettack"), ParameterError);
  auto g = testing::random_graph(10, 0.2, 2, 2, 1);
  EXPECT_EQ(perturb(g, nullptr, NodeSet{1, 2}, {.scenario = Scenario::None}).graph, g);
  EXPECT_THROW(perturb(g, nullptr, NodeSet{1, 2}, {.scenario = Scenario::AdvAttack}), ParameterError);
  EXPECT_THROW(perturb(g, nullptr, NodeSet{1}, {.perturbator_fraction = 1.5}), ParameterError);
}

class AttackTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    g_ = new Graph(generate_sbm({.seed = 1}));
    split_ = new NodeSplit(split_nodes(600, 0.1, 0.2, 0.7, 1));
    model_ = new GcnModel(train(*g_, *split_, *g_->latent_labels(), {.seed = 1}));
  }
  static void TearDownTestSuite() {
    delete g_;
    delete split_;
    delete model_;
  }
  static Graph* g_;
  static NodeSplit* split_;
  static GcnModel* model_;
};
Graph* AttackTest::g_ = nullptr;
NodeSplit* AttackTest::split_ = nullptr;
GcnModel* AttackTest::model_ = nullptr;

TEST_F(AttackTest, NoBudgetIsIdentity) {
  auto r = adversarial_attack(*g_, *model_, split_->victims(), {.n_pert_links = 0, .n_pert_features = 0});
  EXPECT_EQ(r.graph, *g_);
}

TEST_F(AttackTest, PredictedClassProbabilityNeverRises) {
  auto victims = split_->victims();
  PerturbationSpec spec{.scenario = Scenario::AdvAttack, .seed = 1};
  auto r = adversarial_attack(*g_, *model_, victims, spec);
  ASSERT_FALSE(r.targets.empty());
  for (NodeId v : r.targets) {
    const std::size_t deg = g_->degree(v);
    EXPECT_TRUE(deg > 0 && deg < 10);
  }
  auto before = predict(*model_, *g_, r.targets);
  auto after = predict(*model_, r.graph, r.targets);
  std::size_t hit_before = 0, hit_after = 0;
  const Labels& y = *g_->latent_labels();
  for (std::size_t i = 0; i < r.targets.size(); ++i) {
    const Label c = before.labels[i];
    EXPECT_LE(after.table.probs(i, c), before.table.probs(i, c) + 1e-12);
    hit_before += before.labels[i] == y[r.targets[i]];
    hit_after += after.labels[i] == y[r.targets[i]];
  }
  const double drop = static_cast<double>(hit_before - hit_after) / static_cast<double>(r.targets.size());
  EXPECT_GE(drop, 0.15);
  EXPECT_TRUE(well_formed(r.graph));
  EXPECT_EQ(r.graph, adversarial_attack(*g_, *model_, victims, spec).graph);
}

TEST_F(AttackTest, RejectsNonBinaryFeatures) {
  Matrix x = g_->features();
  x(0, 0) = 0.5;
  EXPECT_THROW(adversarial_attack(g_->with_features(x), *model_, split_->victims(), {}), UnsupportedInputError);
}

TEST(ManifestTest, HeaderAndRows) {
  auto g = testing::random_graph(40, 0.1, 2, 2, 5);
  NodeSet victims(30);
  std::iota(victims.begin(), victims.end(), NodeId{10});
  PerturbationSpec spec{.perturbator_fraction = 0.1, .connections_per_perturbator = 5, .seed = 5};
  auto r = random_perturbation(g, victims, spec);
  auto path = (std::filesystem::temp_directory_path() / "lindt_manifest_test.csv").string();
  write_manifest(r, spec, path);
  std::ifstream in(path);
  std::string line;
  std::size_t comments = 0, rows = 0, flagged = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      ++comments;
    } else if (!header) {
      EXPECT_EQ(line, "node,perturbator,edges_added,edges_removed,features_changed");
      header = true;
    } else {
      ++rows;
      flagged += line.compare(line.find(',') + 1, 2, "1,") == 0;
    }
  }
  EXPECT_GE(comments, 1u);
  EXPECT_EQ(rows, 30u);
  EXPECT_EQ(flagged, r.perturbators.size());
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace lindt
