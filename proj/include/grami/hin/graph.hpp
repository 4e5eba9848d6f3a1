#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grami/error.hpp"
#include "grami/numeric/csr.hpp"
#include "grami/numeric/tensor.hpp"

namespace grami {

struct NodeTypeSchema {
  int id = 0;
  std::string name;
  index_t count = 0;
  bool attributed = false;
  index_t feature_dim = 0;  // 0 for non-attributed types

  friend bool operator==(const NodeTypeSchema&, const NodeTypeSchema&) = default;
};

// Binary adjacency of one relation, rows = src type, cols = dst type.
// Same-type relations are stored symmetrized.
struct RelationMatrix {
  int id = 0;
  std::string name;
  int src_type = 0;
  int dst_type = 0;
  Csr adj;

  bool symmetric() const { return src_type == dst_type; }
  index_t nnz() const { return adj.nnz(); }

  // Distinct edges; a symmetric relation lists each undirected edge once with u <= v.
  std::vector<Pair> edge_pairs() const {
    std::vector<Pair> out;
    out.reserve(static_cast<std::size_t>(adj.nnz()));
    for (const auto& [u, v] : adj.pairs())
      if (!symmetric() || u <= v) out.emplace_back(u, v);
    return out;
  }

  index_t edge_count() const { return static_cast<index_t>(edge_pairs().size()); }

  friend bool operator==(const RelationMatrix&, const RelationMatrix&) = default;
};

struct FeatureTable {
  int type_id = 0;
  MatF matrix;

  friend bool operator==(const FeatureTable& a, const FeatureTable& b) {
    return a.type_id == b.type_id && a.matrix.rows() == b.matrix.rows() && a.matrix.cols() == b.matrix.cols() &&
           a.matrix == b.matrix;
  }
};

struct HinGraph {
  std::vector<NodeTypeSchema> types;
  std::vector<RelationMatrix> relations;
  std::vector<FeatureTable> features;                // attributed types only
  std::vector<std::optional<std::vector<int>>> labels;  // indexed by type id

  int type_id(const std::string& name) const {
    for (const auto& t : types)
      if (t.name == name) return t.id;
    fail(ErrorKind::MissingType, "no node type named '" + name + "'");
  }

  int relation_id(const std::string& name) const {
    for (const auto& r : relations)
      if (r.name == name) return r.id;
    fail(ErrorKind::SchemaMismatch, "no relation named '" + name + "'");
  }

  const NodeTypeSchema& type(int id) const { return types.at(static_cast<std::size_t>(id)); }

  const MatF* features_of(int type) const {
    for (const auto& f : features)
      if (f.type_id == type) return &f.matrix;
    return nullptr;
  }

  MatF* features_of(int type) {
    for (auto& f : features)
      if (f.type_id == type) return &f.matrix;
    return nullptr;
  }

  bool has_labels(int type) const {
    return static_cast<std::size_t>(type) < labels.size() && labels[static_cast<std::size_t>(type)].has_value();
  }

  const std::vector<int>& labels_of(int type) const {
    require(has_labels(type), ErrorKind::MissingFile, "no labels for type '" + this->type(type).name + "'");
    return *labels[static_cast<std::size_t>(type)];
  }

  std::size_t attributed_count() const {
    std::size_t n = 0;
    for (const auto& t : types) n += t.attributed ? 1 : 0;
    return n;
  }

  index_t total_nodes() const {
    index_t n = 0;
    for (const auto& t : types) n += t.count;
    return n;
  }

  // Throws SchemaMismatch / IndexOutOfRange / NonFiniteFeature on any broken invariant.
  void validate() const {
    for (std::size_t i = 0; i < types.size(); ++i) {
      const auto& t = types[i];
      require(t.id == static_cast<int>(i), ErrorKind::SchemaMismatch, "type ids must be dense and ordered");
      require(t.count >= 1, ErrorKind::SchemaMismatch, "type '" + t.name + "' has no nodes");
      require(t.attributed == (t.feature_dim >= 1), ErrorKind::SchemaMismatch,
              "type '" + t.name + "': feature_dim >= 1 iff attributed");
      for (std::size_t j = 0; j < i; ++j)
        require(types[j].name != t.name, ErrorKind::SchemaMismatch, "duplicate type name '" + t.name + "'");
      const MatF* f = features_of(t.id);
      if (t.attributed) {
        require(f != nullptr, ErrorKind::SchemaMismatch, "attributed type '" + t.name + "' has no features");
        require(f->rows() == t.count && f->cols() == t.feature_dim, ErrorKind::SchemaMismatch,
                "features of '" + t.name + "' are " + shape_str(f->rows(), f->cols()));
        require(all_finite(*f), ErrorKind::NonFiniteFeature, "features of '" + t.name + "'");
      } else {
        require(f == nullptr, ErrorKind::SchemaMismatch, "non-attributed type '" + t.name + "' carries features");
      }
    }
    for (std::size_t i = 0; i < relations.size(); ++i) {
      const auto& r = relations[i];
      require(r.id == static_cast<int>(i), ErrorKind::SchemaMismatch, "relation ids must be dense and ordered");
      require(r.src_type >= 0 && r.src_type < static_cast<int>(types.size()) && r.dst_type >= 0 &&
                  r.dst_type < static_cast<int>(types.size()),
              ErrorKind::SchemaMismatch, "relation '" + r.name + "' references an unknown type");
      require(r.adj.rows == type(r.src_type).count && r.adj.cols == type(r.dst_type).count, ErrorKind::SchemaMismatch,
              "relation '" + r.name + "' has shape " + shape_str(r.adj.rows, r.adj.cols));
      for (std::size_t j = 0; j < i; ++j)
        require(relations[j].name != r.name, ErrorKind::SchemaMismatch, "duplicate relation name '" + r.name + "'");
      if (r.symmetric())
        for (const auto& [u, v] : r.adj.pairs())
          require(r.adj.contains(v, u), ErrorKind::SchemaMismatch, "relation '" + r.name + "' is not symmetric");
    }
    for (std::size_t t = 0; t < labels.size() && t < types.size(); ++t)
      if (labels[t])
        require(static_cast<index_t>(labels[t]->size()) == types[t].count, ErrorKind::SchemaMismatch,
                "labels of '" + types[t].name + "' have wrong length");
  }

  friend bool operator==(const HinGraph&, const HinGraph&) = default;
};

// Builds a relation from distinct (src, dst) pairs; same-type relations are
// symmetrized.
inline RelationMatrix make_relation(int id, std::string name, int src_type, int dst_type, index_t n_src,
                                    index_t n_dst, std::vector<Pair> pairs) {
  if (src_type == dst_type) {
    const std::size_t n = pairs.size();
    for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(pairs[i].second, pairs[i].first);
  }
  return RelationMatrix{id, std::move(name), src_type, dst_type, Csr::from_pairs(n_src, n_dst, std::move(pairs))};
}

// Nodes with no neighbor under any relation; they receive zero messages.
inline index_t isolated_node_count(const HinGraph& g) {
  std::vector<std::vector<bool>> seen;
  for (const auto& t : g.types) seen.emplace_back(static_cast<std::size_t>(t.count), false);
  for (const auto& r : g.relations)
    for (const auto& [u, v] : r.adj.pairs()) {
      seen[r.src_type][u] = true;
      seen[r.dst_type][v] = true;
    }
  index_t n = 0;
  for (const auto& s : seen)
    for (bool b : s) n += b ? 0 : 1;
  return n;
}

// FNV-1a over schema and adjacency; features are excluded.
inline std::uint64_t topology_hash(const HinGraph& g) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& t : g.types) {
    for (char c : t.name) mix(static_cast<unsigned char>(c));
    mix(static_cast<std::uint64_t>(t.count));
    mix(t.attributed ? 1 : 0);
    mix(static_cast<std::uint64_t>(t.feature_dim));
  }
  for (const auto& r : g.relations) {
    mix(static_cast<std::uint64_t>(r.src_type));
    mix(static_cast<std::uint64_t>(r.dst_type));
    for (auto p : r.adj.row_ptr) mix(static_cast<std::uint64_t>(p));
    for (auto c : r.adj.col_idx) mix(static_cast<std::uint64_t>(c));
  }
  return h;
}

}  // namespace grami
