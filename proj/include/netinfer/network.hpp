#pragma once

// Binary directed networks on a fixed node set, plus nodal and dyadic
// covariates. Adjacency is a dense byte matrix; the diagonal is structurally
// absent and any attempt to read or write it throws. Networks are value
// types: samplers mutate their own copies, shared instances are treated as
// immutable by convention.

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "netinfer/csv.hpp"

namespace netinfer {

struct DyadIndex {
  int i = 0;  // sender
  int j = 0;  // receiver
};

// Canonical ordering of the n(n-1) off-diagonal dyads: row-major with the
// diagonal skipped. All dyad-indexed vectors (design matrices, score vectors,
// enumeration bit positions) use this order.
inline long dyad_count(int n) { return static_cast<long>(n) * (n - 1); }

inline long dyad_rank(int n, int i, int j) {
  return static_cast<long>(i) * (n - 1) + (j < i ? j : j - 1);
}

template <typename F>
inline void for_each_dyad(int n, F&& f) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) f(i, j);
}

class DirectedNetwork {
public:
  DirectedNetwork() = default;

  explicit DirectedNetwork(std::vector<std::string> labels)
      : labels_(std::move(labels)), n_(static_cast<int>(labels_.size())),
        adj_(static_cast<std::size_t>(n_) * n_, 0) {
    if (n_ < 2) throw validation_error("a network needs at least 2 nodes");
    for (int k = 0; k < n_; ++k) {
      if (labels_[k].empty()) throw validation_error("empty node label");
      if (!index_.emplace(labels_[k], k).second)
        throw validation_error("duplicate node label: " + labels_[k]);
    }
  }

  int n() const { return n_; }
  long edge_count() const { return edges_; }

  bool edge(int i, int j) const {
    check_dyad(i, j);
    return adj_[static_cast<std::size_t>(i) * n_ + j] != 0;
  }

  void set_edge(int i, int j, bool present) {
    check_dyad(i, j);
    auto& cell = adj_[static_cast<std::size_t>(i) * n_ + j];
    if (cell != static_cast<std::uint8_t>(present)) {
      edges_ += present ? 1 : -1;
      cell = present ? 1 : 0;
    }
  }

  void toggle(int i, int j) { set_edge(i, j, !edge(i, j)); }

  const std::vector<std::string>& node_labels() const { return labels_; }

  int index_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw validation_error("unknown node label: " + label);
    return it->second;
  }

  bool has_node(const std::string& label) const { return index_.count(label) > 0; }

  int in_degree(int j) const {
    int d = 0;
    for (int i = 0; i < n_; ++i)
      if (i != j && edge(i, j)) ++d;
    return d;
  }

  int out_degree(int i) const {
    int d = 0;
    for (int j = 0; j < n_; ++j)
      if (j != i && edge(i, j)) ++d;
    return d;
  }

  bool operator==(const DirectedNetwork& o) const {
    return labels_ == o.labels_ && adj_ == o.adj_;
  }

private:
  void check_dyad(int i, int j) const {
    if (i == j) throw validation_error("diagonal dyad access: self-ties are not modeled");
    if (i < 0 || j < 0 || i >= n_ || j >= n_)
      throw validation_error("dyad index out of range");
  }

  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
  int n_ = 0;
  std::vector<std::uint8_t> adj_;
  long edges_ = 0;
};

inline double density(const DirectedNetwork& y) {
  return static_cast<double>(y.edge_count()) / static_cast<double>(dyad_count(y.n()));
}

struct LoadWarnings {
  long duplicate_edges = 0;
};

// Build a network from (src, dst) label pairs. When `nodes` is given it fixes
// the node set and order (isolates included); otherwise nodes appear in order
// of first mention in the edge list.
inline DirectedNetwork network_from_edges(
    const std::vector<std::pair<std::string, std::string>>& edges,
    const std::optional<std::vector<std::string>>& nodes = std::nullopt,
    LoadWarnings* warnings = nullptr) {
  std::vector<std::string> labels;
  if (nodes) {
    labels = *nodes;
  } else {
    std::unordered_map<std::string, int> seen;
    for (const auto& [a, b] : edges) {
      if (seen.emplace(a, 0).second) labels.push_back(a);
      if (seen.emplace(b, 0).second) labels.push_back(b);
    }
  }
  DirectedNetwork y(labels);
  for (const auto& [a, b] : edges) {
    if (a == b) throw validation_error("self-loop rejected: " + a + " -> " + b);
    const int i = y.index_of(a), j = y.index_of(b);
    if (y.edge(i, j)) {
      if (warnings) ++warnings->duplicate_edges;
    } else {
      y.set_edge(i, j, true);
    }
  }
  return y;
}

// Edge-list CSV with header "src,dst"; optional node list fixes the node set.
inline DirectedNetwork load_network(const std::string& edge_csv_path,
                                    const std::optional<std::string>& node_list_path = std::nullopt,
                                    LoadWarnings* warnings = nullptr) {
  const CsvTable t = read_csv(edge_csv_path);
  if (t.header.size() < 2 || t.header[0] != "src" || t.header[1] != "dst")
    throw validation_error("edge list must start with header 'src,dst': " + edge_csv_path);
  std::vector<std::pair<std::string, std::string>> edges;
  edges.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    if (row.size() < 2 || row[0].empty() || row[1].empty())
      throw validation_error("malformed edge row in " + edge_csv_path);
    edges.emplace_back(row[0], row[1]);
  }
  std::optional<std::vector<std::string>> nodes;
  if (node_list_path) nodes = read_lines(*node_list_path);
  return network_from_edges(edges, nodes, warnings);
}

inline std::string edge_list_csv(const DirectedNetwork& y) {
  std::ostringstream out;
  out << "src,dst\n";
  const auto& labels = y.node_labels();
  for_each_dyad(y.n(), [&](int i, int j) {
    if (y.edge(i, j)) out << labels[i] << "," << labels[j] << "\n";
  });
  return out.str();
}

inline void save_edge_list(const DirectedNetwork& y, const std::string& path) {
  write_text_file(path, edge_list_csv(y));
}

// Nodal covariates are one value per node; dyadic covariates are dense n*n
// matrices (diagonal ignored). Missing dyadic entries default to 0 and are
// counted per covariate so callers can surface a warning.
struct CovariateSet {
  int n = 0;
  std::map<std::string, std::vector<double>> nodal;
  std::map<std::string, std::vector<double>> dyadic;  // row-major n*n
  std::map<std::string, long> dyadic_missing_defaults;

  const std::vector<double>& nodal_values(const std::string& name) const {
    auto it = nodal.find(name);
    if (it == nodal.end()) throw validation_error("unknown nodal covariate: " + name);
    return it->second;
  }

  double dyadic_value(const std::string& name, int i, int j) const {
    auto it = dyadic.find(name);
    if (it == dyadic.end()) throw validation_error("unknown dyadic covariate: " + name);
    return it->second[static_cast<std::size_t>(i) * n + j];
  }

  bool has_nodal(const std::string& name) const { return nodal.count(name) > 0; }
  bool has_dyadic(const std::string& name) const { return dyadic.count(name) > 0; }
};

// Nodal covariate table: first column "node", remaining columns one covariate
// each. Every node of the network must appear exactly once.
inline void add_nodal_table(CovariateSet& cov, const DirectedNetwork& y, const CsvTable& t,
                            const std::string& context) {
  if (t.header.empty() || t.header[0] != "node")
    throw validation_error("nodal covariate table must start with column 'node': " + context);
  const int n = y.n();
  std::vector<std::vector<double>> columns(t.header.size() - 1,
                                           std::vector<double>(n, 0.0));
  std::vector<bool> seen(n, false);
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size())
      throw validation_error("ragged row in nodal covariate table: " + context);
    const int idx = y.index_of(row[0]);
    if (seen[idx]) throw validation_error("node listed twice in nodal table: " + row[0]);
    seen[idx] = true;
    for (std::size_t c = 1; c < row.size(); ++c)
      columns[c - 1][idx] = parse_real(row[c], context + ", node " + row[0]);
  }
  for (int k = 0; k < n; ++k)
    if (!seen[k])
      throw validation_error("nodal covariate table is missing node: " + y.node_labels()[k]);
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    if (t.header[c].empty()) throw validation_error("unnamed covariate column in " + context);
    if (!cov.nodal.emplace(t.header[c], std::move(columns[c - 1])).second)
      throw validation_error("duplicate covariate name: " + t.header[c]);
  }
}

// Dyadic covariate in long form: header "src,dst,value". Pairs not listed
// default to 0 (counted).
inline void add_dyadic_long(CovariateSet& cov, const DirectedNetwork& y, const std::string& name,
                            const CsvTable& t, const std::string& context) {
  const int n = y.n();
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<std::uint8_t> filled(static_cast<std::size_t>(n) * n, 0);
  for (const auto& row : t.rows) {
    if (row.size() != 3) throw validation_error("dyadic long row needs 3 fields: " + context);
    const int i = y.index_of(row[0]), j = y.index_of(row[1]);
    if (i == j) throw validation_error("dyadic covariate lists a diagonal entry: " + context);
    m[static_cast<std::size_t>(i) * n + j] = parse_real(row[2], context);
    filled[static_cast<std::size_t>(i) * n + j] = 1;
  }
  long missing = 0;
  for_each_dyad(n, [&](int i, int j) {
    if (!filled[static_cast<std::size_t>(i) * n + j]) ++missing;
  });
  if (!cov.dyadic.emplace(name, std::move(m)).second)
    throw validation_error("duplicate covariate name: " + name);
  cov.dyadic_missing_defaults[name] = missing;
}

// Dyadic covariate as a labeled square matrix: first header cell arbitrary,
// remaining header cells are column labels; each row starts with its label.
inline void add_dyadic_matrix(CovariateSet& cov, const DirectedNetwork& y, const std::string& name,
                              const CsvTable& t, const std::string& context) {
  const int n = y.n();
  if (static_cast<int>(t.header.size()) != n + 1 || static_cast<int>(t.rows.size()) != n)
    throw validation_error("square dyadic matrix must be n x n with labels: " + context);
  std::vector<int> col(n);
  for (int c = 0; c < n; ++c) col[c] = y.index_of(t.header[c + 1]);
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  for (const auto& row : t.rows) {
    if (static_cast<int>(row.size()) != n + 1)
      throw validation_error("ragged row in dyadic matrix: " + context);
    const int i = y.index_of(row[0]);
    for (int c = 0; c < n; ++c) {
      const int j = col[c];
      if (i == j) continue;  // diagonal ignored
      m[static_cast<std::size_t>(i) * n + j] = parse_real(row[c + 1], context);
    }
  }
  if (!cov.dyadic.emplace(name, std::move(m)).second)
    throw validation_error("duplicate covariate name: " + name);
  cov.dyadic_missing_defaults[name] = 0;
}

// Load a covariate bundle: optional nodal table plus named dyadic sources.
// A dyadic source whose header is exactly "src,dst,value" is treated as long
// form, anything else as a labeled square matrix.
inline CovariateSet load_covariates(const DirectedNetwork& y,
                                    const std::optional<std::string>& nodal_csv_path,
                                    const std::map<std::string, std::string>& dyadic_paths) {
  CovariateSet cov;
  cov.n = y.n();
  if (nodal_csv_path) add_nodal_table(cov, y, read_csv(*nodal_csv_path), *nodal_csv_path);
  for (const auto& [name, path] : dyadic_paths) {
    const CsvTable t = read_csv(path);
    const bool long_form = t.header.size() == 3 && t.header[0] == "src" &&
                           t.header[1] == "dst" && t.header[2] == "value";
    if (long_form)
      add_dyadic_long(cov, y, name, t, path);
    else
      add_dyadic_matrix(cov, y, name, t, path);
  }
  return cov;
}

}  // namespace netinfer
