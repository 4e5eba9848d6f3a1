#pragma once

#include "grami/model/model.hpp"
#include "grami/numeric/grad_check.hpp"

namespace grami {

// 3 papers (attributed, 3 features), 2 authors, 1 subject. Every aggregation
// path is exercised: a same-type relation, two cross-type relations, a node
// with several incoming directions, and a node with no neighbor under one.
inline HinGraph toy_graph() {
  HinGraph g;
  g.types = {{0, "paper", 3, true, 3}, {1, "author", 2, false, 0}, {2, "subject", 1, false, 0}};
  g.relations.push_back(make_relation(0, "cites", 0, 0, 3, 3, {{0, 1}}));
  g.relations.push_back(make_relation(1, "writes", 0, 1, 3, 2, {{0, 0}, {1, 0}, {2, 1}}));
  g.relations.push_back(make_relation(2, "about", 0, 2, 3, 1, {{0, 0}}));
  MatF x(3, 3);
  x << 0.5f, -1.0f, 0.25f, 1.5f, 0.0f, -0.5f, -0.75f, 0.8f, 1.2f;
  g.features.push_back({0, x});
  g.labels = {std::vector<int>{0, 0, 1}, std::vector<int>{0, 1}, std::nullopt};
  g.validate();
  return g;
}

// Non-edges paired one-to-one with the toy's positives.
inline EdgeBatch toy_batch(const HinGraph& g) {
  EdgeBatch b;
  for (const auto& r : g.relations) b.positives.push_back(r.edge_pairs());
  b.negatives = {{{0, 2}}, {{0, 1}, {1, 1}, {2, 0}}, {{2, 0}}};
  return b;
}

inline TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.hidden_dim = 2;
  cfg.latent_dim = 3;
  cfg.heads = 2;
  cfg.decoder_layers = 1;
  cfg.noise_node = 2;
  cfg.noise_attr = 2;
  cfg.dropout = 0.3;
  cfg.lambda1 = 1.0;
  cfg.lambda2 = 1.0;
  return cfg;
}

// Finite-difference check of the full training loss in double precision with
// noise, dropout masks and negatives frozen.
inline GradCheckResult toy_grad_check(std::uint64_t seed = 7, double h = 1e-6) {
  const HinGraph g = toy_graph();
  const auto inputs = ModelInputs<double>::of(g);
  const TrainConfig cfg = toy_config();
  GramiModel<double> model(inputs.schema, cfg);
  RngStream rng(seed);
  model.initialize(rng);
  const auto noise = NoiseDraws<double>::draw(model.schema(), cfg, rng, true);
  const EdgeBatch batch = toy_batch(g);
  ScalarFn f = [&](Tape<double>& tape, ParamStore<double>&) {
    const auto fw = model.forward(tape, inputs, noise);
    return model.loss(tape, fw, inputs, batch).total;
  };
  return grad_check(f, model.params(), h);
}

}  // namespace grami
