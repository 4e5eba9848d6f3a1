#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "grami/hin/graph.hpp"
#include "grami/numeric/rng.hpp"

namespace grami {

struct SplitRatios {
  double train = 0.85;
  double val = 0.05;
  double test = 0.10;
};

struct RelationSplit {
  std::vector<Pair> train_pos, val_pos, test_pos;
  std::vector<Pair> train_neg, val_neg, test_neg;

  friend bool operator==(const RelationSplit&, const RelationSplit&) = default;
};

// Indexed by relation id.
struct EdgeSplit {
  std::vector<RelationSplit> relations;
  std::uint64_t seed = 0;
  SplitRatios ratios;

  friend bool operator==(const EdgeSplit& a, const EdgeSplit& b) {
    return a.relations == b.relations && a.seed == b.seed;
  }
};

// Largest-remainder rounding of m items over the three ratios; ties go to the
// earlier partition. When m >= 3, every partition receives at least one item.
inline std::array<index_t, 3> partition_sizes(index_t m, const SplitRatios& r) {
  const std::array<double, 3> w{r.train, r.val, r.test};
  std::array<index_t, 3> size{};
  std::array<double, 3> frac{};
  index_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = w[i] * static_cast<double>(m);
    size[i] = static_cast<index_t>(std::floor(exact + 1e-9));
    frac[i] = exact - static_cast<double>(size[i]);
    assigned += size[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int k = 0; assigned < m; k = (k + 1) % 3, ++assigned) ++size[order[k]];
  if (m >= 3) {
    for (int i = 0; i < 3; ++i) {
      if (size[i] > 0) continue;
      const auto donor = std::max_element(size.begin(), size.end()) - size.begin();
      --size[donor];
      ++size[i];
    }
  }
  return size;
}

// Uniform rejection sampler over the non-edges of one relation.
class NegativeSampler {
 public:
  NegativeSampler(const RelationMatrix& rel, const std::vector<Pair>& known_edges)
      : n_src_(rel.adj.rows), n_dst_(rel.adj.cols), symmetric_(rel.symmetric()) {
    edges_.reserve(known_edges.size() * 2);
    for (const auto& p : known_edges) edges_.insert(key(canonical(p)));
  }

  // Draws `count` non-edges; aborts after 100x oversampling.
  std::vector<Pair> sample(std::size_t count, RngStream& rng, const std::string& relation_name) const {
    std::vector<Pair> out;
    out.reserve(count);
    const std::size_t budget = 100 * count;
    std::size_t attempts = 0;
    while (out.size() < count) {
      require(attempts++ < budget, ErrorKind::NegativeSamplingExhausted,
              "relation '" + relation_name + "': " + std::to_string(out.size()) + " of " + std::to_string(count) +
                  " negatives after " + std::to_string(budget) + " attempts");
      Pair p{static_cast<index_t>(rng.uniform_index(static_cast<std::uint64_t>(n_src_))),
             static_cast<index_t>(rng.uniform_index(static_cast<std::uint64_t>(n_dst_)))};
      if (symmetric_ && p.first == p.second) continue;
      p = canonical(p);
      if (edges_.contains(key(p))) continue;
      out.push_back(p);
    }
    return out;
  }

 private:
  Pair canonical(Pair p) const {
    if (symmetric_ && p.first > p.second) std::swap(p.first, p.second);
    return p;
  }
  std::uint64_t key(Pair p) const {
    return static_cast<std::uint64_t>(p.first) * static_cast<std::uint64_t>(n_dst_) + static_cast<std::uint64_t>(p.second);
  }

  index_t n_src_, n_dst_;
  bool symmetric_;
  std::unordered_set<std::uint64_t> edges_;
};

inline EdgeSplit split_edges(const HinGraph& g, const SplitRatios& ratios, std::uint64_t seed) {
  require(ratios.train > 0 && ratios.val > 0 && ratios.test > 0 &&
              std::abs(ratios.train + ratios.val + ratios.test - 1.0) < 1e-9,
          ErrorKind::Config, "split ratios must be positive and sum to 1");
  EdgeSplit split;
  split.seed = seed;
  split.ratios = ratios;
  const RngStream root(seed);
  for (const auto& rel : g.relations) {
    std::vector<Pair> edges = rel.edge_pairs();
    const auto m = static_cast<index_t>(edges.size());
    require(m >= 3, ErrorKind::RelationTooSmall,
            "relation '" + rel.name + "' has " + std::to_string(m) + " edges, need at least 3");
    RngStream rng = root.fork(static_cast<std::uint64_t>(rel.id));
    for (index_t i = m - 1; i > 0; --i)
      std::swap(edges[i], edges[static_cast<index_t>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)))]);
    const auto sizes = partition_sizes(m, ratios);
    RelationSplit rs;
    rs.train_pos.assign(edges.begin(), edges.begin() + sizes[0]);
    rs.val_pos.assign(edges.begin() + sizes[0], edges.begin() + sizes[0] + sizes[1]);
    rs.test_pos.assign(edges.begin() + sizes[0] + sizes[1], edges.end());
    const NegativeSampler sampler(rel, edges);
    rs.train_neg = sampler.sample(rs.train_pos.size(), rng, rel.name);
    rs.val_neg = sampler.sample(rs.val_pos.size(), rng, rel.name);
    rs.test_neg = sampler.sample(rs.test_pos.size(), rng, rel.name);
    split.relations.push_back(std::move(rs));
  }
  return split;
}

// Copy of g whose adjacency keeps only the training positives.
inline HinGraph training_graph(const HinGraph& g, const EdgeSplit& split) {
  require(split.relations.size() == g.relations.size(), ErrorKind::SchemaMismatch,
          "edge split does not match the graph's relations");
  HinGraph out = g;
  for (auto& rel : out.relations) {
    const auto& train = split.relations[static_cast<std::size_t>(rel.id)].train_pos;
    rel = make_relation(rel.id, rel.name, rel.src_type, rel.dst_type, rel.adj.rows, rel.adj.cols, train);
  }
  return out;
}

}  // namespace grami
