#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "grami/model/model.hpp"
#include "grami/train/toy.hpp"
#include "test_util.hpp"

namespace grami {
namespace {

using testing::gaussian_mat;
using testing::kind_of;

HinGraph single_type_graph(index_t n, index_t d, std::vector<Pair> edges = {}) {
  HinGraph g;
  g.types = {{0, "node", n, true, d}};
  g.relations.push_back(make_relation(0, "link", 0, 0, n, n, std::move(edges)));
  g.features.push_back({0, MatF::Zero(n, d)});
  g.labels.resize(1);
  return g;
}

void randomize(ParamStore<double>& p, std::uint64_t seed, double scale = 0.7) {
  RngStream rng(seed);
  for (auto& e : p) e.value = gaussian_mat<double>(rng, e.value.rows(), e.value.cols(), scale);
}

// ---- projection ----

TEST(Projection, ZeroParametersGiveZeroHidden) {
  const auto in = ModelInputs<double>::of(toy_graph());
  ParamStore<double> p;
  register_projection(p, in.schema, 2);
  Tape<double> t;
  for (const auto& h : project(t, p, in)) EXPECT_TRUE(h.value().isZero());
}

TEST(Projection, ScalarExample) {
  HinGraph g = single_type_graph(1, 2);
  g.features[0].matrix << 0.5f, 0.5f;
  const auto in = ModelInputs<double>::of(g);
  ParamStore<double> p;
  register_projection(p, in.schema, 1);
  p.at("proj.node.weight").value << 1, 1;
  Tape<double> t;
  EXPECT_NEAR(project(t, p, in)[0].value()(0, 0), std::tanh(1.0), 1e-12);
  EXPECT_NEAR(project(t, p, in)[0].value()(0, 0), 0.7616, 1e-4);
}

TEST(Projection, HiddenWidthMustBeBelowFeatureWidth) {
  const auto in = ModelInputs<double>::of(single_type_graph(2, 3));
  ParamStore<double> p;
  EXPECT_EQ(kind_of([&] { register_projection(p, in.schema, 3); }), ErrorKind::Config);
}

TEST(Projection, EmbeddingTableIsARowLookup) {
  const auto in = ModelInputs<double>::of(toy_graph());
  ParamStore<double> p;
  register_projection(p, in.schema, 2);
  randomize(p, 3);
  Tape<double> t;
  const MatD before = project(t, p, in)[1].value();
  const MatD& table = p.at("proj.author.table").value;
  const MatD& bias = p.at("proj.author.bias").value;
  for (index_t u = 0; u < 2; ++u)
    for (index_t j = 0; j < 2; ++j) EXPECT_NEAR(before(u, j), std::tanh(table(u, j) + bias(0, j)), 1e-12);
  p.at("proj.author.table").value(1, 0) += 0.3;
  Tape<double> t2;
  const MatD after = project(t2, p, in)[1].value();
  EXPECT_EQ(after.row(0), before.row(0));
  EXPECT_NE(after(1, 0), before(1, 0));
}

TEST(Projection, OutputsStayInsideOpenUnitInterval) {
  const auto in = ModelInputs<double>::of(toy_graph());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ParamStore<double> p;
    register_projection(p, in.schema, 2);
    randomize(p, seed, 3.0);
    Tape<double> t;
    for (const auto& h : project(t, p, in)) ASSERT_LT(h.value().cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Projection, GradientsPassCheck) {
  const auto in = ModelInputs<double>::of(toy_graph());
  ParamStore<double> p;
  register_projection(p, in.schema, 2);
  randomize(p, 5);
  RngStream rng(6);
  std::vector<MatD> w;
  for (const auto& t : in.schema.types) w.push_back(gaussian_mat<double>(rng, t.count, 2));
  ScalarFn f = [&](Tape<double>& t, ParamStore<double>& ps) {
    auto h = project(t, ps, in);
    Var<double> total;
    for (std::size_t i = 0; i < h.size(); ++i) {
      Var<double> s = sum(mul_const(h[i], w[i]));
      total = total.valid() ? add(total, s) : s;
    }
    return total;
  };
  EXPECT_LT(grad_check(f, p).max_rel_error, 1e-5);
}

// ---- node permutations ----

// Relabels the nodes of type `type` by perm (new index of old node u is perm[u]).
HinGraph permute_type(const HinGraph& g, int type, const std::vector<index_t>& perm) {
  HinGraph out = g;
  for (auto& rel : out.relations) {
    std::vector<Pair> pairs;
    for (auto [u, v] : rel.edge_pairs()) {
      if (rel.src_type == type) u = perm[static_cast<std::size_t>(u)];
      if (rel.dst_type == type) v = perm[static_cast<std::size_t>(v)];
      pairs.emplace_back(u, v);
    }
    rel = make_relation(rel.id, rel.name, rel.src_type, rel.dst_type, rel.adj.rows, rel.adj.cols, pairs);
  }
  if (MatF* x = out.features_of(type)) {
    const MatF old = *x;
    for (std::size_t u = 0; u < perm.size(); ++u) x->row(perm[u]) = old.row(static_cast<index_t>(u));
  }
  if (out.labels[static_cast<std::size_t>(type)]) {
    auto& lab = *out.labels[static_cast<std::size_t>(type)];
    const auto old = lab;
    for (std::size_t u = 0; u < perm.size(); ++u) lab[static_cast<std::size_t>(perm[u])] = old[u];
  }
  return out;
}

TEST(Projection, CommutesWithNodePermutation) {
  const HinGraph g = toy_graph();
  const std::vector<index_t> perm{2, 0, 1};
  const auto in = ModelInputs<double>::of(g);
  const auto pin = ModelInputs<double>::of(permute_type(g, 0, perm));
  ParamStore<double> p;
  register_projection(p, in.schema, 2);
  randomize(p, 8);
  Tape<double> t;
  const MatD a = project(t, p, in)[0].value();
  const MatD b = project(t, p, pin)[0].value();
  for (index_t u = 0; u < 3; ++u) EXPECT_NEAR((a.row(u) - b.row(perm[static_cast<std::size_t>(u)])).norm(), 0, 1e-12);
}

TEST(Encoder, NodeEncodeIsPermutationEquivariant) {
  const HinGraph g = toy_graph();
  TrainConfig cfg = toy_config();
  cfg.dropout = 0;
  for (int type : {0, 1}) {
    std::vector<index_t> perm(static_cast<std::size_t>(g.type(type).count));
    std::iota(perm.rbegin(), perm.rend(), 0);
    const HinGraph pg = permute_type(g, type, perm);
    const auto in = ModelInputs<double>::of(g);
    const auto pin = ModelInputs<double>::of(pg);
    GramiModel<double> model(in.schema, cfg);
    RngStream rng(4);
    model.initialize(rng);
    // the table rows of a non-attributed type move with its nodes
    GramiModel<double> pmodel(pin.schema, cfg);
    pmodel.load_params(model.params());
    if (!g.type(type).attributed) {
      const std::string name = "proj." + g.type(type).name + ".table";
      const MatD old = model.params().at(name).value;
      for (std::size_t u = 0; u < perm.size(); ++u) pmodel.params().at(name).value.row(perm[u]) = old.row(static_cast<index_t>(u));
    }
    const auto noise = NoiseDraws<double>::zeros(in.schema, cfg);
    Tape<double> t;
    const auto a = model.forward(t, in, noise, false);
    const auto b = pmodel.forward(t, pin, noise, false);
    for (std::size_t ty = 0; ty < g.types.size(); ++ty)
      for (index_t u = 0; u < g.types[ty].count; ++u) {
        const index_t pu = static_cast<int>(ty) == type ? perm[static_cast<std::size_t>(u)] : u;
        EXPECT_NEAR((a.node[ty].mu.value().row(u) - b.node[ty].mu.value().row(pu)).norm(), 0, 1e-12);
        EXPECT_NEAR((a.node[ty].logvar.value().row(u) - b.node[ty].logvar.value().row(pu)).norm(), 0, 1e-12);
      }
  }
}

// ---- relation attention ----

struct AttentionFixture {
  Tape<double> tape;
  Csr adj;
  std::vector<index_t> rows;
  MatD h_self, h_nb, w, att;

  AttentionOutput<double> run() {
    rows = adj.row_of_entries();
    return relation_attention(adj, std::span<const index_t>(rows), tape.constant(h_self), tape.constant(h_nb),
                              tape.constant(w), tape.constant(att));
  }
};

TEST(Attention, SingleNeighborPassesItsMessageThrough) {
  RngStream rng(1);
  AttentionFixture f;
  f.adj = Csr::from_pairs(2, 3, {{0, 2}});
  f.h_self = gaussian_mat<double>(rng, 2, 4);
  f.h_nb = gaussian_mat<double>(rng, 3, 4);
  f.w = gaussian_mat<double>(rng, 3, 4);
  f.att = gaussian_mat<double>(rng, 1, 6);
  const auto out = f.run();
  EXPECT_DOUBLE_EQ(out.alpha.value()(0, 0), 1.0);
  EXPECT_LT((out.message.value().row(0) - (f.w * f.h_nb.row(2).transpose()).transpose()).norm(), 1e-12);
  EXPECT_TRUE(out.message.value().row(1).isZero());
}

TEST(Attention, IdenticalNeighborsShareWeightEqually) {
  RngStream rng(2);
  AttentionFixture f;
  f.adj = Csr::from_pairs(1, 2, {{0, 0}, {0, 1}});
  f.h_self = gaussian_mat<double>(rng, 1, 3);
  const MatD x = gaussian_mat<double>(rng, 1, 3);
  f.h_nb = MatD(2, 3);
  f.h_nb << x, x;
  f.w = gaussian_mat<double>(rng, 2, 3);
  f.att = gaussian_mat<double>(rng, 1, 4);
  const auto out = f.run();
  EXPECT_DOUBLE_EQ(out.alpha.value()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(out.alpha.value()(1, 0), 0.5);
  EXPECT_LT((out.message.value().row(0) - (f.w * x.transpose()).transpose()).norm(), 1e-12);
}

// Naive per-edge evaluation of one head.
MatD attention_oracle(const std::vector<Pair>& edges, index_t n_self, const MatD& hs, const MatD& hn, const MatD& w,
                      const MatD& att, double slope) {
  const index_t out = w.rows();
  MatD result = MatD::Zero(n_self, out);
  for (index_t u = 0; u < n_self; ++u) {
    std::vector<double> score;
    std::vector<index_t> nbs;
    for (const auto& [a, b] : edges)
      if (a == u) nbs.push_back(b);
    if (nbs.empty()) continue;
    for (index_t v : nbs) {
      double e = 0;
      for (index_t i = 0; i < out; ++i) {
        double whu = 0, whv = 0;
        for (index_t j = 0; j < w.cols(); ++j) {
          whu += w(i, j) * hs(u, j);
          whv += w(i, j) * hn(v, j);
        }
        e += att(0, i) * whu + att(0, out + i) * whv;
      }
      score.push_back(e > 0 ? e : slope * e);
    }
    double mx = score[0], z = 0;
    for (double s : score) mx = std::max(mx, s);
    for (double& s : score) z += (s = std::exp(s - mx));
    for (std::size_t k = 0; k < nbs.size(); ++k)
      for (index_t i = 0; i < out; ++i) {
        double whv = 0;
        for (index_t j = 0; j < w.cols(); ++j) whv += w(i, j) * hn(nbs[k], j);
        result(u, i) += score[k] / z * whv;
      }
  }
  return result;
}

TEST(Attention, MatchesEdgeLoopOracle) {
  const std::vector<Pair> edges{{0, 1}, {0, 3}, {1, 0}, {2, 2}, {2, 3}, {4, 1}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(seed);
    AttentionFixture f;
    f.adj = Csr::from_pairs(5, 4, edges);
    f.h_self = gaussian_mat<double>(rng, 5, 3);
    f.h_nb = gaussian_mat<double>(rng, 4, 3);
    f.w = gaussian_mat<double>(rng, 2, 3);
    f.att = gaussian_mat<double>(rng, 1, 4);
    const auto out = f.run();
    const MatD oracle = attention_oracle(edges, 5, f.h_self, f.h_nb, f.w, f.att, kAttentionSlope);
    EXPECT_LT((out.message.value() - oracle).cwiseAbs().maxCoeff(), 1e-6);
    for (index_t u = 0; u < 5; ++u) {
      if (f.adj.degree(u) == 0) continue;
      double s = 0;
      for (index_t e = f.adj.row_ptr[u]; e < f.adj.row_ptr[u + 1]; ++e) s += out.alpha.value()(e, 0);
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

// ---- encoders ----

// Independent float64 re-evaluation of the node encoder from parameter names
// and raw edge lists.
std::vector<std::pair<MatD, MatD>> encoder_oracle(const HinGraph& g, const ParamStore<double>& p, const TrainConfig& cfg) {
  const auto schema = ModelSchema::of(g);
  std::vector<MatD> h;
  for (const auto& t : g.types) {
    const std::string pre = "proj." + t.name;
    MatD x = t.attributed ? MatD(g.features_of(t.id)->cast<double>() * p.at(pre + ".weight").value.transpose())
                          : p.at(pre + ".table").value;
    for (index_t u = 0; u < x.rows(); ++u) x.row(u) += p.at(pre + ".bias").value;
    x = x.array().tanh().matrix();
    MatD padded = MatD::Zero(t.count, cfg.hidden_dim + cfg.noise_node);
    padded.leftCols(cfg.hidden_dim) = x;
    h.push_back(padded);
  }
  auto layer = [&](const std::string& prefix, index_t out, const std::vector<MatD>& in) {
    std::vector<MatD> res;
    for (const auto& t : g.types) {
      MatD acc = MatD::Zero(t.count, out);
      std::vector<int> count(static_cast<std::size_t>(t.count), 0);
      for (const auto& dir : schema.directions) {
        if (dir.self_type != t.id) continue;
        const auto& rel = g.relations[static_cast<std::size_t>(dir.relation)];
        std::vector<Pair> edges;
        for (const auto& [a, b] : rel.adj.pairs()) edges.push_back(dir.reversed ? Pair{b, a} : Pair{a, b});
        MatD heads = MatD::Zero(t.count, out);
        for (int k = 0; k < cfg.heads; ++k) {
          const std::string pk = prefix + "." + dir.name + ".h" + std::to_string(k);
          heads += attention_oracle(edges, t.count, in[static_cast<std::size_t>(t.id)],
                                    in[static_cast<std::size_t>(dir.nb_type)], p.at(pk + ".weight").value,
                                    p.at(pk + ".att").value, kAttentionSlope);
        }
        acc += heads / cfg.heads;
        for (index_t u = 0; u < t.count; ++u)
          for (const auto& [a, b] : edges)
            if (a == u) {
              ++count[static_cast<std::size_t>(u)];
              break;
            }
      }
      for (index_t u = 0; u < t.count; ++u)
        if (count[static_cast<std::size_t>(u)]) acc.row(u) /= count[static_cast<std::size_t>(u)];
      res.push_back(acc);
    }
    return res;
  };
  auto l0 = layer("enc.l0", cfg.latent_dim, h);
  for (auto& m : l0) m = m.array().tanh().matrix();
  const auto l1 = layer("enc.l1", 2 * cfg.latent_dim, l0);
  std::vector<std::pair<MatD, MatD>> out;
  for (const auto& m : l1)
    out.emplace_back(m.leftCols(cfg.latent_dim),
                     m.rightCols(cfg.latent_dim).cwiseMax(kLogvarMin).cwiseMin(kLogvarMax));
  return out;
}

TEST(Encoder, MatchesIndependentDeskOracle) {
  const HinGraph g = toy_graph();
  for (int heads : {1, 2}) {
    TrainConfig cfg = toy_config();
    cfg.dropout = 0;
    cfg.heads = heads;
    const auto in = ModelInputs<double>::of(g);
    GramiModel<double> model(in.schema, cfg);
    RngStream rng(10 + heads);
    model.initialize(rng);
    randomize(model.params(), 20 + static_cast<std::uint64_t>(heads), 1.0);
    Tape<double> t;
    const auto fw = model.forward(t, in, NoiseDraws<double>::zeros(in.schema, cfg), false);
    const auto oracle = encoder_oracle(g, model.params(), cfg);
    for (std::size_t ty = 0; ty < oracle.size(); ++ty) {
      EXPECT_LT((fw.node[ty].mu.value() - oracle[ty].first).cwiseAbs().maxCoeff(), 1e-5);
      EXPECT_LT((fw.node[ty].logvar.value() - oracle[ty].second).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST(Encoder, ZeroWeightsGiveStandardLatents) {
  const auto in = ModelInputs<double>::of(toy_graph());
  TrainConfig cfg = toy_config();
  cfg.noise_node = 0;
  cfg.dropout = 0;
  GramiModel<double> model(in.schema, cfg);
  RngStream rng(1);
  model.initialize(rng);
  for (auto& e : model.params())
    if (e.name.starts_with("enc.")) e.value.setZero();
  Tape<double> t;
  const auto fw = model.forward(t, in, NoiseDraws<double>::zeros(in.schema, cfg), false);
  for (const auto& l : fw.node) {
    EXPECT_TRUE(l.mu.value().isZero());
    EXPECT_TRUE(l.logvar.value().isZero());
  }
}

TEST(Encoder, SameSeedSameLatents) {
  const auto in = ModelInputs<double>::of(toy_graph());
  const TrainConfig cfg = toy_config();
  auto run = [&] {
    GramiModel<double> model(in.schema, cfg);
    RngStream rng(9);
    model.initialize(rng);
    const auto noise = NoiseDraws<double>::draw(in.schema, cfg, rng, true);
    Tape<double> t;
    const auto fw = model.forward(t, in, noise, false);
    return std::pair<MatD, MatD>{fw.node[0].mu.value(), fw.node[0].logvar.value()};
  };
  EXPECT_EQ(run(), run());
}

TEST(Encoder, SingletonRelationMeanIsTheMessage) {
  // subject 0 has exactly one incoming direction (about.rev)
  const HinGraph g = toy_graph();
  const auto in = ModelInputs<double>::of(g);
  ParamStore<double> p;
  register_hgnn_layer(p, in.schema, "x", 3, 2, 1);
  randomize(p, 4);
  RngStream rng(5);
  std::vector<Var<double>> h;
  Tape<double> t;
  for (const auto& ty : g.types) h.push_back(t.constant(gaussian_mat<double>(rng, ty.count, 3)));
  const auto out = hgnn_layer(t, p, in, "x", 1, 2, h);
  int d = -1;
  for (std::size_t i = 0; i < in.schema.directions.size(); ++i)
    if (in.schema.directions[i].name == "about.rev") d = static_cast<int>(i);
  ASSERT_GE(d, 0);
  ASSERT_EQ(in.incoming[2].size(), 1u);
  const auto msg = relation_attention(in.adjacency[static_cast<std::size_t>(d)],
                                      std::span<const index_t>(in.entry_rows[static_cast<std::size_t>(d)]), h[2], h[0],
                                      t.param(p, "x.about.rev.h0.weight"), t.param(p, "x.about.rev.h0.att"));
  EXPECT_LT((out[2].value() - msg.message.value()).norm(), 1e-14);
}

TEST(AttributeEncoder, ZeroWeightsGiveStandardLatents) {
  const auto in = ModelInputs<double>::of(toy_graph());
  ParamStore<double> p;
  TrainConfig cfg = toy_config();
  register_attribute_encoder(p, in.schema, cfg);
  Tape<double> t;
  RngStream rng(1);
  const auto lat = attribute_encode(t, p, "paper", t.constant(gaussian_mat<double>(rng, 3, 2)),
                                    gaussian_mat<double>(rng, 2, 2), 3);
  EXPECT_TRUE(lat.mu.value().isZero());
  EXPECT_TRUE(lat.logvar.value().isZero());
  EXPECT_EQ(lat.mu.rows(), 2);
}

TEST(AttributeEncoder, RowsAreAttributesOfTheHiddenMatrix) {
  HinGraph g = single_type_graph(1, 3);
  const auto in = ModelInputs<double>::of(g);
  TrainConfig cfg;
  cfg.hidden_dim = 2;
  cfg.latent_dim = 2;
  cfg.noise_attr = 1;
  ParamStore<double> p;
  register_attribute_encoder(p, in.schema, cfg);
  randomize(p, 3);
  MatD x(1, 2);
  x << 0.2, -0.4;
  const MatD eps = MatD::Constant(2, 1, 0.1);
  Tape<double> t;
  const auto a = attribute_encode(t, p, "node", t.constant(x), eps, 2);
  x(0, 1) += 0.5;
  const auto b = attribute_encode(t, p, "node", t.constant(x), eps, 2);
  EXPECT_EQ(a.mu.value().row(0), b.mu.value().row(0));
  EXPECT_NE(a.mu.value().row(1), b.mu.value().row(1));
}

TEST(AttributeEncoder, MatchesScalarLoopOracle) {
  HinGraph g = single_type_graph(3, 4);
  const auto in = ModelInputs<double>::of(g);
  TrainConfig cfg;
  cfg.hidden_dim = 2;
  cfg.latent_dim = 2;
  cfg.noise_attr = 0;
  ParamStore<double> p;
  register_attribute_encoder(p, in.schema, cfg);
  randomize(p, 12);
  RngStream rng(13);
  const MatD x = gaussian_mat<double>(rng, 3, 2);  // 3 nodes, 2 hidden dims
  Tape<double> t;
  const auto lat = attribute_encode(t, p, "node", t.constant(x), MatD(2, 0), 2);
  const MatD& w1 = p.at("attr_enc.node.w1").value;
  const MatD& b1 = p.at("attr_enc.node.b1").value;
  const MatD& w2 = p.at("attr_enc.node.w2").value;
  const MatD& b2 = p.at("attr_enc.node.b2").value;
  for (index_t l = 0; l < 2; ++l) {
    double hid[2];
    for (index_t i = 0; i < 2; ++i) {
      double s = b1(0, i);
      for (index_t u = 0; u < 3; ++u) s += w1(i, u) * x(u, l);
      hid[i] = std::tanh(s);
    }
    for (index_t o = 0; o < 4; ++o) {
      double s = b2(0, o);
      for (index_t i = 0; i < 2; ++i) s += w2(o, i) * hid[i];
      const double got = o < 2 ? lat.mu.value()(l, o) : lat.logvar.value()(l, o - 2);
      EXPECT_NEAR(got, std::clamp(s, kLogvarMin, kLogvarMax), 1e-6);
    }
  }
}

TEST(Reparameterization, VanishingVarianceReturnsTheMean) {
  Tape<double> t;
  RngStream rng(2);
  const MatD mu = gaussian_mat<double>(rng, 4, 3);
  const MatD zeta = gaussian_mat<double>(rng, 4, 3);
  GaussianLatent<double> lat{t.constant(mu), t.constant(MatD::Constant(4, 3, kLogvarMin)), {}};
  const MatD s = sample_latent(lat, zeta).sample.value();
  for (index_t i = 0; i < s.size(); ++i) EXPECT_LE(std::abs(s.data()[i] - mu.data()[i]), 0.01 * std::abs(zeta.data()[i]));
}

TEST(Reparameterization, StandardLatentSampleMoments) {
  Tape<double> t;
  RngStream rng(3);
  const MatD zeta = gaussian_mat<double>(rng, 10000, 1);
  GaussianLatent<double> lat{t.constant(MatD::Zero(10000, 1)), t.constant(MatD::Zero(10000, 1)), {}};
  const MatD s = sample_latent(lat, zeta).sample.value();
  const double mean = s.mean();
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR((s.array() - mean).square().mean(), 1.0, 0.1);
  RngStream again(3);
  EXPECT_EQ(gaussian_mat<double>(again, 10000, 1), zeta);
}

// ---- decoders ----

TEST(EdgeDecoder, LogitExamples) {
  Tape<double> t;
  MatD ones = MatD::Ones(2, 2);
  const std::vector<Pair> p{{0, 1}};
  EXPECT_EQ(edge_logits(t.constant(MatD::Zero(2, 2)), t.constant(ones), std::span<const Pair>(p)).item(), 0.0);
  const double logit = edge_logits(t.constant(ones), t.constant(ones), std::span<const Pair>(p)).item();
  EXPECT_DOUBLE_EQ(logit, 2.0);
  EXPECT_NEAR(1.0 / (1.0 + std::exp(-logit)), 0.8808, 1e-4);
}

TEST(EdgeDecoder, AllPairsMatchDenseProduct) {
  RngStream rng(4);
  const MatD a = gaussian_mat<double>(rng, 3, 5), b = gaussian_mat<double>(rng, 4, 5);
  std::vector<Pair> all;
  for (index_t u = 0; u < 3; ++u)
    for (index_t v = 0; v < 4; ++v) all.emplace_back(u, v);
  Tape<double> t;
  const MatD logits = edge_logits(t.constant(a), t.constant(b), std::span<const Pair>(all)).value();
  const MatD dense = a * b.transpose();
  for (std::size_t k = 0; k < all.size(); ++k) EXPECT_EQ(logits(static_cast<index_t>(k), 0), dense(all[k].first, all[k].second));
}

TEST(EdgeDecoder, SameTypeLogitsAreSymmetric) {
  RngStream rng(5);
  const MatD z = gaussian_mat<double>(rng, 6, 3);
  Tape<double> t;
  Var<double> zv = t.constant(z);
  for (index_t u = 0; u < 6; ++u)
    for (index_t v = 0; v < 6; ++v) {
      const std::vector<Pair> a{{u, v}}, b{{v, u}};
      EXPECT_EQ(edge_logits(zv, zv, std::span<const Pair>(a)).item(), edge_logits(zv, zv, std::span<const Pair>(b)).item());
    }
}

TEST(HiddenDecoder, ZeroLatentsAndNoRefinementGiveZeros) {
  const auto in = ModelInputs<double>::of(toy_graph());
  ParamStore<double> p;
  Tape<double> t;
  std::vector<Var<double>> zv, za;
  for (const auto& ty : in.schema.types) {
    zv.push_back(t.constant(MatD::Zero(ty.count, 3)));
    za.push_back(t.constant(MatD::Zero(2, 3)));
  }
  for (const auto& x : recon_hidden(t, p, in, zv, za, 0, 1)) EXPECT_TRUE(x.value().isZero());
}

TEST(HiddenDecoder, ScalarExample) {
  const auto in = ModelInputs<double>::of(single_type_graph(1, 2));
  ParamStore<double> p;
  Tape<double> t;
  MatD zv(1, 2), za(1, 2);
  zv << 1, 0;
  za << 1, 0;
  const auto x = recon_hidden(t, p, in, {t.constant(zv)}, {t.constant(za)}, 0, 1);
  EXPECT_NEAR(x[0].value()(0, 0), 0.7616, 1e-4);
}

TEST(HiddenDecoder, UnrefinedOutputStaysInsideUnitInterval) {
  const auto in = ModelInputs<double>::of(toy_graph());
  ParamStore<double> p;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngStream rng(seed);
    Tape<double> t;
    std::vector<Var<double>> zv, za;
    for (const auto& ty : in.schema.types) {
      zv.push_back(t.constant(gaussian_mat<double>(rng, ty.count, 3)));
      za.push_back(t.constant(gaussian_mat<double>(rng, 2, 3)));
    }
    for (const auto& x : recon_hidden(t, p, in, zv, za, 0, 1)) ASSERT_LT(x.value().cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(HiddenDecoder, OneRefinementLayerMatchesEdgeLoopOracle) {
  const HinGraph g = single_type_graph(2, 3, {{0, 1}});
  const auto in = ModelInputs<double>::of(g);
  TrainConfig cfg;
  cfg.hidden_dim = 2;
  cfg.heads = 1;
  ParamStore<double> p;
  register_hgnn_layer(p, in.schema, "dec.l0", 2, 2, 1);
  p.at("dec.l0.link.h0.weight").value << 0.5, -0.25, 1.0, 0.75;
  p.at("dec.l0.link.h0.att").value << 0.1, 0.2, -0.3, 0.4;
  RngStream rng(8);
  const MatD zv = gaussian_mat<double>(rng, 2, 3), za = gaussian_mat<double>(rng, 2, 3);
  Tape<double> t;
  const auto x = recon_hidden(t, p, in, {t.constant(zv)}, {t.constant(za)}, 1, 1);
  const MatD pre = (zv * za.transpose()).array().tanh().matrix();
  // each node has a single neighbor, so its message is W times that neighbor
  const MatD& w = p.at("dec.l0.link.h0.weight").value;
  for (index_t u = 0; u < 2; ++u) {
    const index_t v = 1 - u;
    for (index_t i = 0; i < 2; ++i) {
      const double msg = w(i, 0) * pre(v, 0) + w(i, 1) * pre(v, 1);
      EXPECT_NEAR(x[0].value()(u, i), std::tanh(msg), 1e-6);
    }
  }
}

TEST(RawDecoder, ZeroWeightsAndUnattributedTypes) {
  const auto in = ModelInputs<double>::of(toy_graph());
  ParamStore<double> p;
  register_decoder(p, in.schema, toy_config());
  Tape<double> t;
  RngStream rng(1);
  EXPECT_TRUE(recon_raw(t, p, in.schema, t.constant(gaussian_mat<double>(rng, 3, 2)), 0).value().isZero());
  EXPECT_EQ(kind_of([&] { recon_raw(t, p, in.schema, t.constant(MatD::Zero(2, 2)), 1); }), ErrorKind::NotAttributedType);
  EXPECT_FALSE(p.contains("raw_dec.author.w1"));
}

TEST(RawDecoder, HandSetMlpMatchesScalarOracle) {
  const auto in = ModelInputs<double>::of(single_type_graph(1, 2));
  TrainConfig cfg;
  cfg.hidden_dim = 1;
  cfg.latent_dim = 2;
  cfg.decoder_layers = 0;
  ParamStore<double> p;
  register_decoder(p, in.schema, cfg);
  p.at("raw_dec.node.w1").value << 0.3, -1.2;
  p.at("raw_dec.node.b1").value << 0.1, 0.05;
  p.at("raw_dec.node.w2").value << 1.0, 2.0, -0.5, 0.25;
  p.at("raw_dec.node.b2").value << -0.2, 0.4;
  Tape<double> t;
  const MatD y = recon_raw(t, p, in.schema, t.constant(MatD::Constant(1, 1, 0.5)), 0).value();
  const double h0 = std::tanh(0.3 * 0.5 + 0.1), h1 = std::tanh(-1.2 * 0.5 + 0.05);
  EXPECT_NEAR(y(0, 0), 1.0 * h0 + 2.0 * h1 - 0.2, 1e-9);
  EXPECT_NEAR(y(0, 1), -0.5 * h0 + 0.25 * h1 + 0.4, 1e-9);
}

// ---- loss components ----

TEST(Loss, BceExamples) {
  Tape<double> t;
  const std::vector<Pair> pos{{0, 0}}, neg{{1, 0}};
  MatD zs(2, 1), zd(1, 1);
  zs << 0, 0;
  zd << 1;
  EXPECT_NEAR(relation_bce(t.constant(zs), t.constant(zd), std::span<const Pair>(pos), std::span<const Pair>(neg)).item(),
              std::log(2.0), 1e-12);
  zs << 10, -10;
  const Var<double> b = relation_bce(t.constant(zs), t.constant(zd), std::span<const Pair>(pos), std::span<const Pair>(neg));
  EXPECT_NEAR(b.item(), 4.54e-5, 1e-7);
  EXPECT_DOUBLE_EQ(edge_loss<double>({b, b}).item(), 2 * b.item());
}

TEST(Loss, EdgeLossDecreasesAsAPositiveLogitRises) {
  const std::vector<Pair> pos{{0, 0}, {1, 0}}, neg{{2, 0}, {3, 0}};
  RngStream rng(3);
  MatD zs = gaussian_mat<double>(rng, 4, 1);
  const MatD zd = MatD::Ones(1, 1);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 50; ++step) {
    Tape<double> t;
    const double v = relation_bce(t.constant(zs), t.constant(zd), std::span<const Pair>(pos), std::span<const Pair>(neg)).item();
    EXPECT_LT(v, prev);
    prev = v;
    zs(0, 0) += 0.2;
  }
}

TEST(Loss, KlExamples) {
  Tape<double> t;
  auto kl = [&](double mu, double lv) {
    return gaussian_kl(t.constant(MatD::Constant(1, 1, mu)), t.constant(MatD::Constant(1, 1, lv))).item();
  };
  EXPECT_EQ(kl(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(kl(1, 0), 0.5);
  EXPECT_NEAR(kl(0, std::log(4.0)), 0.5 * (4 - 1 - std::log(4.0)), 1e-12);
  EXPECT_NEAR(kl(0, std::log(4.0)), 0.8069, 1e-4);
}

TEST(Loss, KlIsNonNegativeInsideClampRange) {
  RngStream rng(4);
  for (int i = 0; i < 1000; ++i) {
    Tape<double> t;
    const index_t r = 1 + static_cast<index_t>(rng.uniform_index(5)), c = 1 + static_cast<index_t>(rng.uniform_index(5));
    MatD lv(r, c);
    for (index_t k = 0; k < lv.size(); ++k) lv.data()[k] = kLogvarMin + (kLogvarMax - kLogvarMin) * rng.uniform();
    const MatD mu = gaussian_mat<double>(rng, r, c, std::pow(10.0, -8 + 9 * rng.uniform()));
    ASSERT_GE(gaussian_kl(t.constant(mu), t.constant(lv)).item(), -1e-9);
  }
}

TEST(Loss, LatentKlNormalizations) {
  Tape<double> t;
  RngStream rng(6);
  std::vector<GaussianLatent<double>> lat;
  lat.push_back({t.constant(gaussian_mat<double>(rng, 3, 2)), t.constant(gaussian_mat<double>(rng, 3, 2, 0.3)), {}});
  lat.push_back({t.constant(gaussian_mat<double>(rng, 5, 2)), t.constant(gaussian_mat<double>(rng, 5, 2, 0.3)), {}});
  double raw = 0;
  for (const auto& l : lat)
    raw += 0.5 * (l.logvar.value().array().exp() + l.mu.value().array().square() - 1 - l.logvar.value().array()).sum();
  EXPECT_NEAR(latent_kl(lat, KlNorm::Rows).item(), raw / 8, 1e-12);
  EXPECT_NEAR(latent_kl(lat, KlNorm::RowsSquared).item(), raw / 64, 1e-12);
}

TEST(Loss, AttributeReconstructionExamples) {
  Tape<double> t;
  RngStream rng(7);
  const MatD a = gaussian_mat<double>(rng, 2, 3), b = gaussian_mat<double>(rng, 4, 2);
  EXPECT_EQ(attr_loss<double>({t.constant(a)}, {t.constant(a)}).item(), 0.0);
  EXPECT_NEAR(attr_loss<double>({t.constant(MatD(a.array() + 0.1))}, {t.constant(a)}).item(), 0.01, 1e-12);
  const MatD a2 = gaussian_mat<double>(rng, 2, 3), b2 = gaussian_mat<double>(rng, 4, 2);
  const double one = attr_loss<double>({t.constant(a)}, {t.constant(a2)}).item();
  const double two = attr_loss<double>({t.constant(b)}, {t.constant(b2)}).item();
  EXPECT_NEAR(attr_loss<double>({t.constant(a), t.constant(b)}, {t.constant(a2), t.constant(b2)}).item(), one + two, 1e-12);
}

TEST(Loss, RawRmseExamples) {
  HinGraph one = single_type_graph(2, 2);
  one.features[0].matrix << 1, 2, 3, 4;
  const auto in = ModelInputs<double>::of(one);
  Tape<double> t;
  const MatD x = in.features[0];
  EXPECT_EQ(rmse_loss<double>(t, {t.constant(x)}, in.features, in.schema).item(), 0.0);
  EXPECT_DOUBLE_EQ(rmse_loss<double>(t, {t.constant(MatD(x.array() + 1))}, in.features, in.schema).item(), 2.0);

  HinGraph twin = one;
  twin.types.push_back({1, "twin", 2, true, 2});
  twin.features.push_back({1, one.features[0].matrix});
  twin.labels.resize(2);
  const auto in2 = ModelInputs<double>::of(twin);
  const MatD y = MatD(x.array() + 0.3);
  EXPECT_NEAR(rmse_loss<double>(t, {t.constant(y), t.constant(y)}, in2.features, in2.schema).item(),
              rmse_loss<double>(t, {t.constant(y)}, in.features, in.schema).item(), 1e-12);

  EXPECT_EQ(kind_of([&] { rmse_loss<double>(t, {Var<double>{}}, in.features, in.schema); }), ErrorKind::MissingType);
}

LossTerms<double> constant_terms(Tape<double>& t, double a, double b, double c, double d, double e) {
  auto k = [&t](double v) { return t.constant(MatD::Constant(1, 1, v)); };
  LossTerms<double> terms;
  terms.edge_bce = k(a);
  terms.edge_kl = k(b);
  terms.attr_recon = k(c);
  terms.attr_kl = k(d);
  terms.rmse = k(e);
  return terms;
}

TEST(Loss, TotalCombinesComponents) {
  Tape<double> t;
  const auto terms = constant_terms(t, 1.0, 0.1, 2.0, 0.2, 3.0);
  EXPECT_NEAR(total_loss(terms, LossWeights{0.5, 0.1}).item(), 2.5, 1e-12);
  EXPECT_NEAR(assemble_report(1.0, 0.1, 2.0, 0.2, 3.0, LossWeights{0.5, 0.1}).total, 2.5, 1e-12);
  EXPECT_NEAR(total_loss(terms, LossWeights{0, 0}).item(), 1.1, 1e-12);
  const auto attr_only = constant_terms(t, 0, 0, 2.0, 0.2, 3.0);
  EXPECT_NEAR(total_loss(attr_only, LossWeights{1, 0}).item(), 2.2, 1e-12);
  EXPECT_NEAR(total_loss(terms, LossWeights{0.5, 0.1, 0.0}).item(), 1.1 + 0.3, 1e-12);
}

TEST(Loss, TotalIsLinearInEachWeight) {
  Tape<double> t;
  RngStream rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto terms = constant_terms(t, rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform());
    const double l2 = rng.uniform();
    const double f0 = total_loss(terms, {0.0, l2}).item(), f5 = total_loss(terms, {0.5, l2}).item(),
                 f1 = total_loss(terms, {1.0, l2}).item();
    EXPECT_NEAR(f5, (f0 + f1) / 2, 1e-12);
    const double l1 = rng.uniform();
    const double g0 = total_loss(terms, {l1, 0.0}).item(), g5 = total_loss(terms, {l1, 0.5}).item(),
                 g1 = total_loss(terms, {l1, 1.0}).item();
    EXPECT_NEAR(g5, (g0 + g1) / 2, 1e-12);
  }
}

TEST(Loss, ReportMatchesInvariantOnTheToy) {
  const HinGraph g = toy_graph();
  const auto in = ModelInputs<double>::of(g);
  const TrainConfig cfg = toy_config();
  GramiModel<double> model(in.schema, cfg);
  RngStream rng(3);
  model.initialize(rng);
  const auto noise = NoiseDraws<double>::draw(in.schema, cfg, rng, true);
  Tape<double> t;
  const auto fw = model.forward(t, in, noise);
  const auto terms = model.loss(t, fw, in, toy_batch(g));
  const LossReport r = terms.report(model.relation_names(), model.weights());
  EXPECT_NEAR(r.total, r.edge_bce + r.edge_kl + cfg.lambda1 * (r.attr_recon + r.attr_kl) + cfg.lambda2 * r.rmse, 1e-6);
  EXPECT_GE(r.edge_kl, -1e-9);
  EXPECT_GE(r.attr_kl, -1e-9);
  ASSERT_EQ(r.per_relation.size(), 3u);
  double s = 0;
  for (const auto& [name, v] : r.per_relation) s += v;
  EXPECT_NEAR(s, r.edge_bce, 1e-12);
  EXPECT_FALSE(fw.recon_raw[1].valid());
  EXPECT_FALSE(fw.recon_raw[2].valid());
}

// ---- whole-loss gradient ----

TEST(WholeLoss, GradientMatchesFiniteDifferences) {
  const GradCheckResult r = toy_grad_check();
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_name;
  EXPECT_GT(r.coordinates, 100u);
}

TEST(WholeLoss, GradientVariants) {
  const HinGraph g = toy_graph();
  const auto in = ModelInputs<double>::of(g);
  for (int variant = 0; variant < 3; ++variant) {
    TrainConfig cfg = toy_config();
    if (variant == 0) cfg.kl_norm = "rows";
    if (variant == 1) cfg.heads = 1, cfg.decoder_layers = 0, cfg.dropout = 0;
    if (variant == 2) cfg.noise_node = 0, cfg.noise_attr = 0, cfg.decoder_layers = 2;
    GramiModel<double> model(in.schema, cfg);
    RngStream rng(40 + static_cast<std::uint64_t>(variant));
    model.initialize(rng);
    const auto noise = NoiseDraws<double>::draw(in.schema, cfg, rng, true);
    const EdgeBatch batch = toy_batch(g);
    ScalarFn f = [&](Tape<double>& t, ParamStore<double>&) {
      const auto fw = model.forward(t, in, noise);
      return model.loss(t, fw, in, batch).total;
    };
    const auto r = grad_check(f, model.params(), 1e-6);
    EXPECT_LT(r.max_rel_error, 1e-4) << "variant " << variant << " at " << r.worst_name;
  }
}

TEST(Model, MismatchedSchemaIsRejected) {
  const auto in = ModelInputs<double>::of(toy_graph());
  GramiModel<double> model(in.schema, toy_config());
  const auto other = ModelInputs<double>::of(single_type_graph(3, 3, {{0, 1}}));
  Tape<double> t;
  EXPECT_EQ(kind_of([&] { model.forward(t, other, NoiseDraws<double>::zeros(other.schema, toy_config())); }),
            ErrorKind::ShapeMismatch);
}

}  // namespace
}  // namespace grami
