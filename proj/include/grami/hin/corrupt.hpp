#pragma once

#include <cmath>

#include "grami/hin/graph.hpp"
#include "grami/numeric/rng.hpp"

namespace grami {

// Population standard deviation over every attributed feature entry of g.
inline double global_feature_std(const HinGraph& g) {
  double sum = 0, sq = 0;
  double n = 0;
  for (const auto& f : g.features) {
    for (index_t i = 0; i < f.matrix.size(); ++i) {
      const double v = f.matrix.data()[i];
      sum += v;
      sq += v * v;
    }
    n += static_cast<double>(f.matrix.size());
  }
  if (n == 0) return 0;
  const double mean = sum / n;
  return std::sqrt(std::max(0.0, sq / n - mean * mean));
}

// Adds i.i.d. N(0, (k*sigma)^2) to every attributed feature, sigma being the
// global feature standard deviation. Topology and non-attributed types are
// untouched.
inline HinGraph corrupt_features(const HinGraph& g, double multiplier, std::uint64_t seed) {
  require(g.attributed_count() > 0, ErrorKind::NoAttributedType, "graph has no attributed node type to corrupt");
  require(multiplier >= 0 && std::isfinite(multiplier), ErrorKind::Config, "noise multiplier must be >= 0");
  HinGraph out = g;
  const double stddev = multiplier * global_feature_std(g);
  if (stddev == 0) return out;
  RngStream rng(seed);
  for (auto& f : out.features)
    for (index_t i = 0; i < f.matrix.size(); ++i)
      f.matrix.data()[i] = static_cast<float>(f.matrix.data()[i] + stddev * rng.gaussian());
  return out;
}

}  // namespace grami
