#pragma once

// Text formats:
//   edges     one undirected edge per line, "u v" (0-based)
//   features  "N d" header, then N rows of d decimals
//   labels    "N K" header, then lines "node_id label"
//   splits    N lines "node_id role", role in {train,val,test}

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "lindt/error.hpp"
#include "lindt/graph.hpp"

namespace lindt {

namespace io_detail {

inline std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, const std::string& file, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError(file, line, "cannot parse '" + std::string(tok) + "' as a number");
  return value;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace io_detail

struct LabelFile {
  std::size_t num_nodes = 0;
  std::size_t num_classes = 0;
  Labels labels;  // kNoLabel where the file has no entry
};

inline LabelFile read_labels(const std::string& path) {
  using namespace io_detail;
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  LabelFile lf;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = tokens(line);
    if (t.empty()) continue;
    if (t.size() != 2) throw ParseError(path, lineno, "expected two fields");
    if (!header) {
      lf.num_nodes = parse_number<std::size_t>(t[0], path, lineno);
      lf.num_classes = parse_number<std::size_t>(t[1], path, lineno);
      lf.labels.assign(lf.num_nodes, kNoLabel);
      header = true;
      continue;
    }
    const auto node = parse_number<std::size_t>(t[0], path, lineno);
    const auto label = parse_number<long long>(t[1], path, lineno);
    if (node >= lf.num_nodes)
      throw RangeError(path + ":" + std::to_string(lineno) + ": node " + std::to_string(node) + " >= N");
    if (label < 0 || static_cast<std::size_t>(label) >= lf.num_classes)
      throw RangeError(path + ":" + std::to_string(lineno) + ": label " + std::to_string(label) + " outside [0,K)");
    lf.labels[node] = static_cast<Label>(label);
  }
  if (!header) throw ParseError(path, lineno, "missing 'N K' header");
  return lf;
}

inline Matrix read_features(const std::string& path) {
  using namespace io_detail;
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  std::size_t n = 0, d = 0, row = 0;
  bool header = false;
  Matrix x;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = tokens(line);
    if (t.empty()) continue;
    if (!header) {
      if (t.size() != 2) throw ParseError(path, lineno, "expected 'N d' header");
      n = parse_number<std::size_t>(t[0], path, lineno);
      d = parse_number<std::size_t>(t[1], path, lineno);
      x = Matrix(n, d);
      header = true;
      continue;
    }
    if (row >= n) throw ParseError(path, lineno, "more feature rows than the header's N=" + std::to_string(n));
    if (t.size() != d)
      throw ParseError(path, lineno, "expected " + std::to_string(d) + " values, got " + std::to_string(t.size()));
    for (std::size_t f = 0; f < d; ++f) x(row, f) = parse_number<double>(t[f], path, lineno);
    ++row;
  }
  if (!header) throw ParseError(path, lineno, "missing 'N d' header");
  if (row != n)
    throw ParseError(path, lineno, "header declares " + std::to_string(n) + " rows, found " + std::to_string(row));
  return x;
}

struct LoadResult {
  Graph graph;
  std::size_t self_loops_dropped = 0;
  std::size_t duplicate_edges = 0;
};

/// Reads the three graph files. Edges are symmetrized, duplicates collapse and
/// self-loops are dropped (counted in the result).
inline LoadResult load_graph(const std::string& edges_path, const std::string& features_path,
                             const std::string& labels_path) {
  using namespace io_detail;
  Matrix x = read_features(features_path);
  const std::size_t n = x.rows();
  LabelFile lf = read_labels(labels_path);
  if (lf.num_nodes != n)
    throw ParseError(labels_path, 1, "label header N=" + std::to_string(lf.num_nodes) + " differs from features N=" +
                                         std::to_string(n));

  LoadResult res;
  NeighborLists nb(n);
  auto in = open_in(edges_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = tokens(line);
    if (t.empty()) continue;
    if (t.size() != 2) throw ParseError(edges_path, lineno, "expected two node indices");
    const auto u = parse_number<std::size_t>(t[0], edges_path, lineno);
    const auto v = parse_number<std::size_t>(t[1], edges_path, lineno);
    if (u >= n || v >= n)
      throw RangeError(edges_path + ":" + std::to_string(lineno) + ": node index >= N=" + std::to_string(n));
    if (u == v) {
      ++res.self_loops_dropped;
      continue;
    }
    nb[u].push_back(static_cast<NodeId>(v));
    nb[v].push_back(static_cast<NodeId>(u));
  }
  std::size_t raw = 0;
  for (const auto& l : nb) raw += l.size();

  std::optional<Labels> labels;
  if (std::none_of(lf.labels.begin(), lf.labels.end(), [](Label l) { return l == kNoLabel; })) labels = lf.labels;
  res.graph = Graph(std::move(nb), std::move(x), lf.num_classes, std::move(labels));
  res.duplicate_edges = (raw - res.graph.indices().size()) / 2;
  return res;
}

inline void write_edges(const Graph& g, const std::string& path) {
  auto out = io_detail::open_out(path);
  for (auto [u, v] : g.edge_list()) out << u << ' ' << v << '\n';
}

inline void write_features(const Matrix& x, const std::string& path) {
  auto out = io_detail::open_out(path);
  out << x.rows() << ' ' << x.cols() << '\n';
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t f = 0; f < x.cols(); ++f) {
      if (f) out << ' ';
      out << io_detail::format_double(x(i, f));
    }
    out << '\n';
  }
}

/// Writes every node that carries a label.
inline void write_labels(std::span<const Label> labels, std::size_t k, const std::string& path) {
  auto out = io_detail::open_out(path);
  out << labels.size() << ' ' << k << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoLabel) out << i << ' ' << labels[i] << '\n';
}

inline void write_splits(const NodeSplit& s, const std::string& path) {
  const std::size_t n = s.size();
  std::vector<const char*> role(n, nullptr);
  for (NodeId v : s.train) role.at(v) = "train";
  for (NodeId v : s.val) role.at(v) = "val";
  for (NodeId v : s.test) role.at(v) = "test";
  auto out = io_detail::open_out(path);
  for (std::size_t i = 0; i < n; ++i) out << i << ' ' << role[i] << '\n';
}

inline NodeSplit read_splits(const std::string& path, std::size_t n) {
  using namespace io_detail;
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<int> seen(n, 0);
  NodeSplit s;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = tokens(line);
    if (t.empty()) continue;
    if (t.size() != 2) throw ParseError(path, lineno, "expected 'node_id role'");
    const auto node = parse_number<std::size_t>(t[0], path, lineno);
    if (node >= n) throw RangeError(path + ":" + std::to_string(lineno) + ": node index >= N=" + std::to_string(n));
    if (seen[node]++) throw ParseError(path, lineno, "node " + std::to_string(node) + " listed twice");
    if (t[1] == "train")
      s.train.push_back(static_cast<NodeId>(node));
    else if (t[1] == "val")
      s.val.push_back(static_cast<NodeId>(node));
    else if (t[1] == "test")
      s.test.push_back(static_cast<NodeId>(node));
    else
      throw ParseError(path, lineno, "unknown role '" + std::string(t[1]) + "'");
  }
  if (s.size() != n) throw ParseError(path, lineno, "splits cover " + std::to_string(s.size()) + " of " + std::to_string(n) + " nodes");
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

/// File names used for a graph stored as a directory.
struct GraphFiles {
  std::filesystem::path dir;
  std::string edges() const { return (dir / "edges.txt").string(); }
  std::string features() const { return (dir / "features.txt").string(); }
  std::string labels() const { return (dir / "labels.txt").string(); }
  std::string splits() const { return (dir / "splits.txt").string(); }
};

inline void write_graph_dir(const Graph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  GraphFiles f{dir};
  write_edges(g, f.edges());
  write_features(g.features(), f.features());
  Labels labels = g.latent_labels().value_or(Labels(g.num_nodes(), kNoLabel));
  write_labels(labels, g.num_classes(), f.labels());
}

}  // namespace lindt
