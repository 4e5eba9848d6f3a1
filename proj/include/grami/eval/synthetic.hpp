#pragma once

#include <string>
#include <vector>

#include "grami/hin/graph.hpp"
#include "grami/numeric/rng.hpp"

namespace grami {

// Two-type stochastic block HIN: attributed "papers" whose features are their
// community centroid plus Gaussian noise, attribute-free "authors", and one
// paper-author relation wired with p_intra inside a community and p_cross
// across. Communities are contiguous index blocks.
struct SyntheticSpec {
  index_t papers = 200;
  index_t authors = 100;
  int communities = 4;
  double p_intra = 0.2;
  double p_cross = 0.01;
  index_t feature_dim = 100;
  double centroid_scale = 0.005;  // centroid entries ~ N(0, centroid_scale^2)
  double feature_noise = 0.1;
  std::uint64_t seed = 0;
  std::string paper_type = "paper";
  std::string author_type = "author";
  std::string relation = "paper-author";
};

struct SyntheticHin {
  HinGraph graph;
  std::vector<int> paper_labels;
  std::vector<int> author_labels;
};

inline int block_of(index_t i, index_t n, int blocks) {
  return static_cast<int>(i * blocks / n);
}

inline SyntheticHin make_synthetic_hin(const SyntheticSpec& spec) {
  require(spec.p_intra >= 0 && spec.p_intra <= 1 && spec.p_cross >= 0 && spec.p_cross <= 1, ErrorKind::Config,
          "edge probabilities must lie in [0, 1]");
  require(spec.papers >= spec.communities && spec.authors >= spec.communities && spec.communities >= 1,
          ErrorKind::Config, "every community needs at least one node of each type");
  const RngStream root(spec.seed);
  SyntheticHin out;
  for (index_t i = 0; i < spec.papers; ++i) out.paper_labels.push_back(block_of(i, spec.papers, spec.communities));
  for (index_t i = 0; i < spec.authors; ++i) out.author_labels.push_back(block_of(i, spec.authors, spec.communities));

  RngStream feat = root.fork(1);
  MatF centroids(spec.communities, spec.feature_dim);
  for (index_t i = 0; i < centroids.size(); ++i)
    centroids.data()[i] = static_cast<float>(spec.centroid_scale * feat.gaussian());
  MatF x(spec.papers, spec.feature_dim);
  for (index_t i = 0; i < spec.papers; ++i)
    for (index_t j = 0; j < spec.feature_dim; ++j)
      x(i, j) = centroids(out.paper_labels[static_cast<std::size_t>(i)], j) +
                static_cast<float>(spec.feature_noise * feat.gaussian());

  RngStream wiring = root.fork(2);
  std::vector<Pair> pairs;
  for (index_t p = 0; p < spec.papers; ++p)
    for (index_t a = 0; a < spec.authors; ++a) {
      const bool same = out.paper_labels[static_cast<std::size_t>(p)] == out.author_labels[static_cast<std::size_t>(a)];
      if (wiring.uniform() < (same ? spec.p_intra : spec.p_cross)) pairs.emplace_back(p, a);
    }

  HinGraph& g = out.graph;
  g.types = {{0, spec.paper_type, spec.papers, true, spec.feature_dim}, {1, spec.author_type, spec.authors, false, 0}};
  g.relations.push_back(make_relation(0, spec.relation, 0, 1, spec.papers, spec.authors, std::move(pairs)));
  g.features.push_back({0, std::move(x)});
  g.labels = {out.paper_labels, out.author_labels};
  g.validate();
  return out;
}

}  // namespace grami
