#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "lindt/metrics.hpp"
#include "test_support.hpp"

namespace lindt {
namespace {

CategoricalTable table(std::initializer_list<std::vector<double>> rows) {
  CategoricalTable t{Matrix(rows.size(), rows.begin()->size())};
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::copy(r.begin(), r.end(), t.probs.row(i).begin());
    ++i;
  }
  return t;
}

TEST(AccuracyTest, Examples) {
  Labels truth{0, 1, 2, 1};
  NodeSet all{0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(accuracy(truth, truth, all), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(Labels{1, 0, 0, 0}, truth, all), 0.0);
  EXPECT_DOUBLE_EQ(accuracy(Labels{0, 1, 2, 0}, truth, all), 0.75);
  EXPECT_DOUBLE_EQ(accuracy(Labels{0, 1, 2, 0}, truth, NodeSet{0, 1}), 1.0);
  EXPECT_THROW(accuracy(truth, truth, NodeSet{}), ParameterError);
}

TEST(AccuracyTest, InvariantUnderClassPermutation) {
  Rng rng(4);
  Labels pred(200), truth(200);
  for (std::size_t i = 0; i < 200; ++i) {
    pred[i] = static_cast<Label>(rng() % 4);
    truth[i] = static_cast<Label>(rng() % 4);
  }
  NodeSet all(200);
  std::iota(all.begin(), all.end(), NodeId{0});
  std::vector<Label> perm{3, 1, 0, 2};
  Labels pp(200), tp(200);
  for (std::size_t i = 0; i < 200; ++i) {
    pp[i] = perm[pred[i]];
    tp[i] = perm[truth[i]];
  }
  EXPECT_DOUBLE_EQ(accuracy(pred, truth, all), accuracy(pp, tp, all));
}

TEST(EntropyTest, Examples) {
  EXPECT_DOUBLE_EQ(avg_normalized_entropy(table({{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}})), 1.0);
  EXPECT_DOUBLE_EQ(avg_normalized_entropy(table({{1, 0, 0}, {0, 0, 1}})), 0.0);
  EXPECT_DOUBLE_EQ(avg_normalized_entropy(table({{0.5, 0.5}, {1, 0}})), 0.5);
  std::vector<std::size_t> rows{1};
  EXPECT_DOUBLE_EQ(avg_normalized_entropy(table({{0.5, 0.5}, {1, 0}}), rows), 0.0);
  EXPECT_THROW(avg_normalized_entropy(table({{1.0}})), ParameterError);
}

TEST(EntropyTest, BoundedOnRandomTables) {
  Rng rng(9);
  std::gamma_distribution<double> gamma(0.3, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m(20, 5);
    for (std::size_t i = 0; i < 20; ++i) {
      double s = 0.0;
      for (double& x : m.row(i)) s += (x = gamma(rng));
      for (double& x : m.row(i)) x /= s;
    }
    const double e = avg_normalized_entropy(CategoricalTable{m});
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0 + 1e-12);
  }
}

TEST(TotalVariationTest, Examples) {
  std::vector<double> p{0.2, 0.3, 0.5}, a{1, 0}, b{0, 1}, h{0.5, 0.5};
  EXPECT_DOUBLE_EQ(total_variation(p, p), 0.0);
  EXPECT_DOUBLE_EQ(total_variation(a, b), 1.0);
  EXPECT_DOUBLE_EQ(total_variation(h, a), 0.5);
  EXPECT_DOUBLE_EQ(total_variation(a, h), total_variation(h, a));
  EXPECT_THROW(total_variation(p, a), ShapeError);
}

TEST(LabelDistributionTest, Examples) {
  EXPECT_EQ(label_distribution(Labels{0, 0, 1, 1}, 2), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(label_distribution(Labels{0, 0, 0}, 3), (std::vector<double>{1.0, 0.0, 0.0}));
  Labels y{2, 0, 1, 1, 2, 2, 0};
  auto d = label_distribution(y, 3);
  std::reverse(y.begin(), y.end());
  EXPECT_EQ(label_distribution(y, 3), d);
  EXPECT_THROW(label_distribution(Labels{3}, 3), RangeError);
}

TEST(ConfusionTest, RowSumsAreTruthCounts) {
  Rng rng(2);
  Labels truth(100), pred(100);
  for (std::size_t i = 0; i < 100; ++i) {
    truth[i] = static_cast<Label>(rng() % 3);
    pred[i] = static_cast<Label>(rng() % 3);
  }
  NodeSet nodes;
  for (NodeId v = 0; v < 100; v += 3) nodes.push_back(v);
  auto c = confusion_matrix(truth, pred, nodes, 3);
  std::vector<std::size_t> counts(3, 0);
  std::size_t diag = 0;
  for (NodeId v : nodes) {
    ++counts[truth[v]];
    diag += truth[v] == pred[v];
  }
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(std::accumulate(c[k].begin(), c[k].end(), std::size_t{0}), counts[k]);
  EXPECT_EQ(c[0][0] + c[1][1] + c[2][2], diag);
}

}  // namespace
}  // namespace lindt
