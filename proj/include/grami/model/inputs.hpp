#pragma once

#include <string>
#include <vector>

#include "grami/hin/graph.hpp"
#include "grami/numeric/csr.hpp"

namespace grami {

// One message-passing direction: nodes of `self_type` aggregate from their
// neighbors of `nb_type` through `relation`. A cross-type relation yields two
// directions (forward and reverse); a same-type relation yields one.
struct Direction {
  int relation = 0;
  int self_type = 0;
  int nb_type = 0;
  bool reversed = false;
  std::string name;
};

// Everything about a graph the model's parameter shapes depend on.
struct ModelSchema {
  std::vector<NodeTypeSchema> types;
  struct Relation {
    std::string name;
    int src_type;
    int dst_type;
  };
  std::vector<Relation> relations;
  std::vector<Direction> directions;

  static ModelSchema of(const HinGraph& g) {
    ModelSchema s;
    s.types = g.types;
    for (const auto& r : g.relations) {
      s.relations.push_back({r.name, r.src_type, r.dst_type});
      if (r.symmetric()) {
        s.directions.push_back({r.id, r.src_type, r.src_type, false, r.name});
      } else {
        s.directions.push_back({r.id, r.src_type, r.dst_type, false, r.name + ".fwd"});
        s.directions.push_back({r.id, r.dst_type, r.src_type, true, r.name + ".rev"});
      }
    }
    return s;
  }

  std::size_t type_count() const { return types.size(); }
  std::size_t attributed_count() const {
    std::size_t n = 0;
    for (const auto& t : types) n += t.attributed ? 1 : 0;
    return n;
  }
};

// Graph data in the form the forward pass consumes. Holds the adjacency the
// tape's sparse kernels reference, so it must outlive any tape built on it.
template <class S>
struct ModelInputs {
  ModelSchema schema;
  std::vector<Mat<S>> features;          // per type; empty for non-attributed
  std::vector<Csr> adjacency;            // per direction: rows = self nodes, cols = neighbors
  std::vector<std::vector<index_t>> entry_rows;  // per direction: row of each stored entry
  std::vector<std::vector<int>> incoming;        // per type: directions aggregating into it
  std::vector<std::vector<S>> relation_mean;     // per type, per node: 1 / #non-empty incoming directions

  static ModelInputs of(const HinGraph& g) {
    ModelInputs in;
    in.schema = ModelSchema::of(g);
    in.features.resize(g.types.size());
    for (const auto& f : g.features) in.features[static_cast<std::size_t>(f.type_id)] = f.matrix.template cast<S>();
    in.incoming.resize(g.types.size());
    for (std::size_t d = 0; d < in.schema.directions.size(); ++d) {
      const auto& dir = in.schema.directions[d];
      const auto& adj = g.relations[static_cast<std::size_t>(dir.relation)].adj;
      in.adjacency.push_back(dir.reversed ? adj.transpose() : adj);
      in.entry_rows.push_back(in.adjacency.back().row_of_entries());
      in.incoming[static_cast<std::size_t>(dir.self_type)].push_back(static_cast<int>(d));
    }
    for (const auto& t : g.types) {
      std::vector<S> counts(static_cast<std::size_t>(t.count), S(0));
      for (int d : in.incoming[static_cast<std::size_t>(t.id)]) {
        const Csr& a = in.adjacency[static_cast<std::size_t>(d)];
        for (index_t u = 0; u < a.rows; ++u) counts[u] += a.degree(u) > 0 ? S(1) : S(0);
      }
      for (auto& c : counts) c = c > 0 ? S(1) / c : S(0);
      in.relation_mean.push_back(std::move(counts));
    }
    return in;
  }

  index_t count(int type) const { return schema.types[static_cast<std::size_t>(type)].count; }
};

}  // namespace grami
