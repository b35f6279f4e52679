#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gcnkit/error.hpp"
#include "gcnkit/tensor/sparse.hpp"

namespace gcnkit {

inline constexpr int kUnlabeled = -1;

/**
 * @brief One transductive node-classification problem.
 *
 * adjacency is symmetric with an empty diagonal; features is n x d; labels
 * holds a class in [0, num_classes) or kUnlabeled. The three masks are sorted,
 * duplicate-free and pairwise disjoint.
 */
struct Dataset {
  std::string name;
  std::size_t num_nodes = 0;
  std::size_t num_classes = 0;
  SparseMatrix adjacency;
  SparseMatrix features;
  std::vector<int> labels;
  std::vector<std::size_t> train_mask;
  std::vector<std::size_t> val_mask;
  std::vector<std::size_t> test_mask;

  std::size_t num_features() const noexcept { return features.cols(); }

  bool operator==(const Dataset&) const = default;
};

struct DatasetStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t classes = 0;
  std::size_t features = 0;
  double label_mismatch = 0.0;
  double label_ratio = 0.0;
};

struct LoadOptions {
  bool row_normalize_features = true;
};

namespace graphio_detail {

/// Reads non-blank, non-comment lines and hands (line number, fields) to fn.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    fields.clear();
    std::size_t i = 0;
    while (i < sv.size()) {
      while (i < sv.size() && (sv[i] == ' ' || sv[i] == '\t' || sv[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < sv.size() && sv[j] != ' ' && sv[j] != '\t' && sv[j] != '\r') ++j;
      if (j > i) fields.push_back(sv.substr(i, j - i));
      i = j;
    }
    if (fields.empty()) continue;
    fn(lineno, fields);
  }
}

inline std::size_t parse_index(std::string_view field, const std::string& file, std::size_t line) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw FormatError(file, line, "expected a non-negative integer, got '" + std::string(field) + "'");
  }
  return value;
}

inline double parse_real(std::string_view field, const std::string& file, std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw FormatError(file, line, "expected a finite number, got '" + std::string(field) + "'");
  }
  return value;
}

inline void require_fields(const std::vector<std::string_view>& f, std::size_t n,
                           const std::string& file, std::size_t line) {
  if (f.size() != n) {
    throw FormatError(file, line, "expected " + std::to_string(n) + " fields, got " +
                                      std::to_string(f.size()));
  }
}

inline std::vector<std::size_t> read_index_file(const std::filesystem::path& path,
                                                std::size_t num_nodes) {
  const std::string file = path.filename().string();
  std::vector<std::size_t> out;
  for_each_record(path, [&](std::size_t line, const auto& f) {
    require_fields(f, 1, file, line);
    auto v = parse_index(f[0], file, line);
    if (v >= num_nodes) throw FormatError(file, line, "node id " + std::to_string(v) + " out of range");
    out.push_back(v);
  });
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw FormatError(file, 0, "duplicate node id in split");
  }
  return out;
}

inline std::size_t count_shared(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return common.size();
}

}  // namespace graphio_detail

/// Throws ContractViolation when any Dataset invariant fails.
inline void validate_dataset(const Dataset& d) {
  const std::size_t n = d.num_nodes;
  if (d.adjacency.rows() != n || d.adjacency.cols() != n) {
    throw ContractViolation("dataset: adjacency shape " + d.adjacency.shape());
  }
  if (d.features.rows() != n) throw ContractViolation("dataset: features shape " + d.features.shape());
  if (d.labels.size() != n) throw ContractViolation("dataset: label vector length");
  if (!is_symmetric(d.adjacency)) throw ContractViolation("dataset: adjacency not symmetric");
  if (!has_zero_diagonal(d.adjacency)) throw ContractViolation("dataset: adjacency has self-loops");
  if (d.num_classes < 2) throw ContractViolation("dataset: need at least 2 classes");
  std::vector<bool> seen(d.num_classes, false);
  for (int y : d.labels) {
    if (y == kUnlabeled) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= d.num_classes) {
      throw ContractViolation("dataset: label out of range");
    }
    seen[static_cast<std::size_t>(y)] = true;
  }
  for (std::size_t c = 0; c < d.num_classes; ++c) {
    if (!seen[c]) throw ContractViolation("dataset: class " + std::to_string(c) + " never appears");
  }
  for (auto v : d.train_mask) {
    if (d.labels.at(v) == kUnlabeled) {
      throw ContractViolation("dataset: train node " + std::to_string(v) + " is unlabeled");
    }
  }
  using graphio_detail::count_shared;
  if (count_shared(d.train_mask, d.val_mask) || count_shared(d.train_mask, d.test_mask) ||
      count_shared(d.val_mask, d.test_mask)) {
    throw ContractViolation("dataset: split masks overlap");
  }
}

/// Scales every feature row to unit sum; empty rows stay empty.
inline SparseMatrix row_normalize_features(SparseMatrix features) {
  return row_normalized(std::move(features));
}

/**
 * @brief Loads the text dataset format from `dir`.
 *
 * Files: meta.json, graph.edges, features.sparse, labels.txt, train.idx,
 * val.idx, test.idx. Edges are undirected; they are symmetrized, self-loops
 * are dropped and duplicates collapse to a single unit entry. An empty `name`
 * takes the name recorded in meta.json.
 */
inline Dataset load_dataset(const std::filesystem::path& dir, std::string name = {},
                            const LoadOptions& options = {}) {
  namespace gd = graphio_detail;
  const auto meta_path = dir / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw IoError("cannot open " + meta_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("meta.json", 0, e.what());
  }
  for (const char* key : {"name", "num_nodes", "num_features", "num_classes"}) {
    if (!meta.contains(key)) throw FormatError("meta.json", 0, std::string("missing key '") + key + "'");
  }
  Dataset d;
  try {
    d.name = name.empty() ? meta.at("name").get<std::string>() : std::move(name);
    d.num_nodes = meta.at("num_nodes").get<std::size_t>();
    d.num_classes = meta.at("num_classes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("meta.json", 0, e.what());
  }
  const auto num_features = meta.at("num_features").get<std::size_t>();
  const std::size_t n = d.num_nodes;

  std::vector<Triplet> edges;
  gd::for_each_record(dir / "graph.edges", [&](std::size_t line, const auto& f) {
    gd::require_fields(f, 2, "graph.edges", line);
    auto u = gd::parse_index(f[0], "graph.edges", line);
    auto v = gd::parse_index(f[1], "graph.edges", line);
    if (u >= n || v >= n) throw FormatError("graph.edges", line, "node id out of range");
    if (u == v) return;
    edges.push_back({u, v, 1.0});
    edges.push_back({v, u, 1.0});
  });
  d.adjacency = SparseMatrix::from_triplets(n, n, std::move(edges), Duplicates::keep_last);

  std::vector<Triplet> feats;
  gd::for_each_record(dir / "features.sparse", [&](std::size_t line, const auto& f) {
    gd::require_fields(f, 3, "features.sparse", line);
    auto node = gd::parse_index(f[0], "features.sparse", line);
    auto feat = gd::parse_index(f[1], "features.sparse", line);
    auto val = gd::parse_real(f[2], "features.sparse", line);
    if (node >= n) throw FormatError("features.sparse", line, "node id out of range");
    if (feat >= num_features) throw FormatError("features.sparse", line, "feature index out of range");
    if (val != 0.0) feats.push_back({node, feat, val});
  });
  d.features = SparseMatrix::from_triplets(n, num_features, std::move(feats), Duplicates::keep_last);
  if (options.row_normalize_features) d.features = row_normalize_features(std::move(d.features));

  d.labels.assign(n, kUnlabeled);
  gd::for_each_record(dir / "labels.txt", [&](std::size_t line, const auto& f) {
    gd::require_fields(f, 2, "labels.txt", line);
    auto node = gd::parse_index(f[0], "labels.txt", line);
    auto cls = gd::parse_index(f[1], "labels.txt", line);
    if (node >= n) throw FormatError("labels.txt", line, "node id out of range");
    if (cls >= d.num_classes) throw FormatError("labels.txt", line, "class index out of range");
    d.labels[node] = static_cast<int>(cls);
  });

  d.train_mask = gd::read_index_file(dir / "train.idx", n);
  d.val_mask = gd::read_index_file(dir / "val.idx", n);
  d.test_mask = gd::read_index_file(dir / "test.idx", n);

  try {
    validate_dataset(d);
  } catch (const ContractViolation& e) {
    throw FormatError(dir.string(), 0, e.what());
  }
  return d;
}

/// Table-1 style summary. Edges are undirected (nnz / 2); label mismatch only
/// looks at edges whose two endpoints are both training nodes.
inline DatasetStats compute_stats(const Dataset& d) {
  DatasetStats s;
  s.nodes = d.num_nodes;
  s.edges = d.adjacency.nnz() / 2;
  s.classes = d.num_classes;
  s.features = d.num_features();
  std::vector<bool> in_train(d.num_nodes, false);
  for (auto v : d.train_mask) in_train[v] = true;
  std::size_t train_edges = 0;
  std::size_t mismatched = 0;
  for (std::size_t u = 0; u < d.num_nodes; ++u) {
    if (!in_train[u]) continue;
    for (auto v : d.adjacency.row_cols(u)) {
      if (v <= u || !in_train[v]) continue;
      ++train_edges;
      if (d.labels[u] != d.labels[v]) ++mismatched;
    }
  }
  s.label_mismatch =
      train_edges == 0 ? 0.0 : static_cast<double>(mismatched) / static_cast<double>(train_edges);
  s.label_ratio = d.num_nodes == 0 ? 0.0
                                   : static_cast<double>(d.train_mask.size()) /
                                         static_cast<double>(d.num_nodes);
  return s;
}

/// Writes `d` in the directory format read by load_dataset (features as stored).
inline void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* file) {
    std::ofstream out(dir / file);
    if (!out) throw IoError("cannot write " + (dir / file).string());
    out.precision(17);
    return out;
  };
  {
    nlohmann::json meta = {{"name", d.name},
                           {"num_nodes", d.num_nodes},
                           {"num_features", d.num_features()},
                           {"num_classes", d.num_classes}};
    open("meta.json") << meta.dump(2) << "\n";
  }
  {
    auto out = open("graph.edges");
    for (std::size_t u = 0; u < d.num_nodes; ++u)
      for (auto v : d.adjacency.row_cols(u))
        if (v > u) out << u << ' ' << v << '\n';
  }
  {
    auto out = open("features.sparse");
    for (std::size_t u = 0; u < d.num_nodes; ++u) {
      auto cols = d.features.row_cols(u);
      auto vals = d.features.row_values(u);
      for (std::size_t k = 0; k < cols.size(); ++k) out << u << ' ' << cols[k] << ' ' << vals[k] << '\n';
    }
  }
  {
    auto out = open("labels.txt");
    for (std::size_t u = 0; u < d.num_nodes; ++u)
      if (d.labels[u] != kUnlabeled) out << u << ' ' << d.labels[u] << '\n';
  }
  auto write_idx = [&](const char* file, const std::vector<std::size_t>& idx) {
    auto out = open(file);
    for (auto v : idx) out << v << '\n';
  };
  write_idx("train.idx", d.train_mask);
  write_idx("val.idx", d.val_mask);
  write_idx("test.idx", d.test_mask);
}

}  // namespace gcnkit
