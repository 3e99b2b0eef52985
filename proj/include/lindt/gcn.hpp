#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lindt/error.hpp"
#include "lindt/graph.hpp"
#include "lindt/matrix.hpp"

namespace lindt {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t max_epochs = 200;
  std::size_t hidden_units = 200;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ParameterError("train config: learning_rate must be positive");
    if (max_epochs < 1) throw ParameterError("train config: max_epochs must be at least 1");
    if (hidden_units < 1) throw ParameterError("train config: hidden_units must be at least 1");
  }
};

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Matrix m1, v1, m2, v2;
  std::uint64_t step = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Two-layer GCN without biases: logits = Â ReLU(Â X W1) W2.
struct GcnModel {
  Matrix w1;  // d x h
  Matrix w2;  // h x K
  AdamState adam;

  std::size_t input_dim() const noexcept { return w1.rows(); }
  std::size_t hidden_units() const noexcept { return w1.cols(); }
  std::size_t num_classes() const noexcept { return w2.cols(); }

  friend bool operator==(const GcnModel&, const GcnModel&) = default;
};

/// Row-stochastic N x K table of class distributions.
struct CategoricalTable {
  Matrix probs;

  std::size_t rows() const noexcept { return probs.rows(); }
  std::size_t num_classes() const noexcept { return probs.cols(); }
  std::span<const double> row(std::size_t i) const { return probs.row(i); }
};

/// Glorot-uniform initialised model with zeroed optimizer state.
inline GcnModel init_model(std::size_t input_dim, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  if (input_dim == 0 || hidden == 0 || classes == 0) throw ShapeError("init_model: dimensions must be non-zero");
  Rng rng(seed);
  auto glorot = [&rng](std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix w(fan_in, fan_out);
    for (double& x : w.data()) x = u(rng);
    return w;
  };
  GcnModel m;
  m.w1 = glorot(input_dim, hidden);
  m.w2 = glorot(hidden, classes);
  m.adam = {Matrix(input_dim, hidden), Matrix(input_dim, hidden), Matrix(hidden, classes), Matrix(hidden, classes), 0};
  return m;
}

/// In-place numerically stable row softmax.
inline void softmax_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : r) mx = std::max(mx, v);
    double s = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      s += v;
    }
    for (double& v : r) v /= s;
  }
}

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
  Matrix z1;  // Â X W1
  Matrix h1;  // ReLU(z1)
  Matrix logits;
  Matrix probs;
};

inline ForwardCache forward_cached(const GcnModel& model, const SparseMatrix& a_hat, const Matrix& x) {
  require_shape(x.rows() == a_hat.n, "forward: feature rows differ from adjacency order");
  require_shape(x.cols() == model.w1.rows(), "forward: feature width " + std::to_string(x.cols()) +
                                                 " differs from model input " + std::to_string(model.w1.rows()));
  require_shape(model.w1.cols() == model.w2.rows(), "forward: hidden widths of W1 and W2 differ");
  ForwardCache c;
  c.z1 = spmm(a_hat, matmul(x, model.w1));
  c.h1 = c.z1;
  for (double& v : c.h1.data()) v = v > 0.0 ? v : 0.0;
  c.logits = spmm(a_hat, matmul(c.h1, model.w2));
  c.probs = c.logits;
  softmax_rows(c.probs);
  return c;
}

struct ForwardResult {
  Matrix logits;
  CategoricalTable probs;
};

inline ForwardResult forward(const GcnModel& model, const SparseMatrix& a_hat, const Matrix& x) {
  auto c = forward_cached(model, a_hat, x);
  return {std::move(c.logits), {std::move(c.probs)}};
}

struct Gradients {
  double loss = 0.0;
  Matrix w1;
  Matrix w2;
};

/// Mean cross-entropy over `mask` and its exact gradients w.r.t. W1 and W2.
/// `labels` is a full-length vector; entries outside the mask are ignored.
inline Gradients loss_and_gradients(const GcnModel& model, const SparseMatrix& a_hat, const Matrix& x,
                                    std::span<const Label> labels, std::span<const NodeId> mask) {
  if (mask.empty()) throw ParameterError("loss_and_gradients: empty mask");
  require_shape(labels.size() == a_hat.n, "loss_and_gradients: label vector length differs from node count");
  const std::size_t k = model.num_classes();
  auto c = forward_cached(model, a_hat, x);

  Gradients g;
  const double inv = 1.0 / static_cast<double>(mask.size());
  Matrix dlogits(a_hat.n, k);
  for (NodeId i : mask) {
    const Label y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw RangeError("loss_and_gradients: label " + std::to_string(y) + " of node " + std::to_string(i) +
                       " outside [0," + std::to_string(k) + ")");
    // log p computed from logits to stay finite when p underflows
    auto lr = c.logits.row(i);
    double mx = lr[0];
    for (double v : lr) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : lr) s += std::exp(v - mx);
    g.loss -= (lr[y] - mx - std::log(s)) * inv;
    for (std::size_t j = 0; j < k; ++j) dlogits(i, j) += c.probs(i, j) * inv;
    dlogits(i, y) -= inv;
  }

  // Â is symmetric, so Â^T G = Â G.
  Matrix d_hw2 = spmm(a_hat, dlogits);
  g.w2 = matmul_at_b(c.h1, d_hw2);
  Matrix d_h1 = matmul_a_bt(d_hw2, model.w2);
  for (std::size_t p = 0; p < d_h1.size(); ++p)
    if (c.z1.data()[p] <= 0.0) d_h1.data()[p] = 0.0;
  Matrix d_xw1 = spmm(a_hat, d_h1);
  g.w1 = matmul_at_b(x, d_xw1);
  return g;
}

inline void adam_update(GcnModel& model, const Gradients& g, double lr) {
  auto& st = model.adam;
  ++st.step;
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(st.step));
  auto apply = [&](Matrix& w, const Matrix& grad, Matrix& m, Matrix& v) {
    for (std::size_t p = 0; p < w.size(); ++p) {
      const double gp = grad.data()[p];
      m.data()[p] = AdamState::kBeta1 * m.data()[p] + (1.0 - AdamState::kBeta1) * gp;
      v.data()[p] = AdamState::kBeta2 * v.data()[p] + (1.0 - AdamState::kBeta2) * gp * gp;
      const double mhat = m.data()[p] / c1;
      const double vhat = v.data()[p] / c2;
      w.data()[p] -= lr * mhat / (std::sqrt(vhat) + AdamState::kEps);
    }
  };
  apply(model.w1, g.w1, st.m1, st.v1);
  apply(model.w2, g.w2, st.m2, st.v2);
}

/// Runs `epochs` full-batch Adam steps on the masked cross-entropy. Returns the
/// loss observed before each step.
inline std::vector<double> fit(GcnModel& model, const SparseMatrix& a_hat, const Matrix& x,
                               std::span<const Label> labels, std::span<const NodeId> mask, std::size_t epochs,
                               double lr) {
  std::vector<double> losses;
  losses.reserve(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    auto g = loss_and_gradients(model, a_hat, x, labels, mask);
    if (!std::isfinite(g.loss)) throw TrainingError(e, "loss is not finite");
    adam_update(model, g, lr);
    for (double w : model.w1.data())
      if (!std::isfinite(w)) throw TrainingError(e, "non-finite weight in W1");
    for (double w : model.w2.data())
      if (!std::isfinite(w)) throw TrainingError(e, "non-finite weight in W2");
    losses.push_back(g.loss);
  }
  return losses;
}

struct TrainResult {
  GcnModel model;
  std::vector<double> losses;
};

/// Trains a fresh model on `nodes` of `g` with the given (possibly noisy) labels.
inline TrainResult train_on(const Graph& g, std::span<const NodeId> nodes, std::span<const Label> labels,
                            const TrainConfig& cfg) {
  cfg.validate();
  for (NodeId v : nodes)
    if (labels[v] == kNoLabel) throw ParameterError("train: node " + std::to_string(v) + " has no training label");
  TrainResult r{init_model(g.feature_dim(), cfg.hidden_units, g.num_classes(), cfg.seed), {}};
  const auto a_hat = normalize_adjacency(g);
  r.losses = fit(r.model, a_hat, g.features(), labels, nodes, cfg.max_epochs, cfg.learning_rate);
  return r;
}

inline GcnModel train(const Graph& g, const NodeSplit& split, std::span<const Label> noisy_labels,
                      const TrainConfig& cfg) {
  return train_on(g, split.train, noisy_labels, cfg).model;
}

/// Argmax with ties broken toward the lowest index.
inline Label argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return static_cast<Label>(best);
}

struct Prediction {
  CategoricalTable table;  // rows in node_set order
  Labels labels;
};

inline Prediction predict(const GcnModel& model, const Graph& g, std::span<const NodeId> nodes) {
  auto full = forward(model, normalize_adjacency(g), g.features());
  Prediction p{{Matrix(nodes.size(), model.num_classes())}, Labels(nodes.size())};
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    auto src = full.probs.row(nodes[r]);
    std::copy(src.begin(), src.end(), p.table.probs.row(r).begin());
    p.labels[r] = argmax(src);
  }
  return p;
}

/// Continues Adam from the model's current state for `epochs` epochs, fitting
/// the inferred labels on `nodes` of the (possibly perturbed) graph.
inline GcnModel retrain(GcnModel model, const Graph& g_test, std::span<const Label> inferred,
                        std::span<const NodeId> nodes, std::size_t epochs, const TrainConfig& cfg) {
  if (epochs == 0) return model;
  for (NodeId v : nodes) {
    const Label y = inferred[v];
    if (y < 0 || static_cast<std::size_t>(y) >= model.num_classes())
      throw RangeError("retrain: inferred label " + std::to_string(y) + " outside [0,K)");
  }
  fit(model, normalize_adjacency(g_test), g_test.features(), inferred, nodes, epochs, cfg.learning_rate);
  return model;
}

inline constexpr const char* kCheckpointMagic = "LINDT-GCN-1";

/// Text checkpoint: magic line, "h d K", then W1 (d rows of h) and W2 (h rows
/// of K) in row-major order with round-trip decimal precision. Optimizer state
/// is not stored.
inline void save_model(const GcnModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << kCheckpointMagic << '\n' << m.hidden_units() << ' ' << m.input_dim() << ' ' << m.num_classes() << '\n';
  out.precision(17);
  auto dump = [&out](const Matrix& w) {
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) out << (j ? " " : "") << w(i, j);
      out << '\n';
    }
  };
  dump(m.w1);
  dump(m.w2);
}

inline GcnModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::string magic;
  std::getline(in, magic);
  if (!magic.empty() && magic.back() == '\r') magic.pop_back();
  if (magic != kCheckpointMagic) throw ParseError(path, 1, "bad magic header '" + magic + "'");
  std::size_t h = 0, d = 0, k = 0;
  if (!(in >> h >> d >> k) || h == 0 || d == 0 || k == 0) throw ParseError(path, 2, "expected 'h d K'");
  GcnModel m = init_model(d, h, k, 0);
  auto slurp = [&](Matrix& w, std::size_t first_line) {
    for (std::size_t p = 0; p < w.size(); ++p)
      if (!(in >> w.data()[p])) throw ParseError(path, first_line + p / w.cols(), "truncated weight matrix");
  };
  slurp(m.w1, 3);
  slurp(m.w2, 3 + d);
  return m;
}

}  // namespace lindt
