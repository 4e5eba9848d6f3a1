#pragma once

#include <span>
#include <string>
#include <vector>

#include "grami/model/config.hpp"
#include "grami/model/inputs.hpp"
#include "grami/numeric/ops.hpp"
#include "grami/numeric/rng.hpp"

namespace grami {

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;
inline constexpr double kAttentionSlope = 0.2;

// Diagonal Gaussian per row: node axis (one row per node) or attribute axis
// (one row per hidden dimension).
template <class S>
struct GaussianLatent {
  Var<S> mu;
  Var<S> logvar;
  Var<S> sample;
};

// Every random draw one forward pass consumes, drawn up front so the pass is
// a deterministic function of the parameters. All-zero draws give the
// deterministic inference pass (no injected noise, latents at their means).
template <class S>
struct NoiseDraws {
  std::vector<Mat<S>> eps_node;    // per type: n_i x noise_node
  std::vector<Mat<S>> eps_attr;    // per type: hidden x noise_attr
  std::vector<Mat<S>> zeta_node;   // per type: n_i x k
  std::vector<Mat<S>> zeta_attr;   // per type: hidden x k
  std::vector<std::vector<Mat<S>>> dropout;  // [encoder layer][type] keep masks; empty when disabled

  static NoiseDraws zeros(const ModelSchema& schema, const TrainConfig& cfg) {
    NoiseDraws d;
    for (const auto& t : schema.types) {
      d.eps_node.push_back(Mat<S>::Zero(t.count, cfg.noise_node));
      d.eps_attr.push_back(Mat<S>::Zero(cfg.hidden_dim, cfg.noise_attr));
      d.zeta_node.push_back(Mat<S>::Zero(t.count, cfg.latent_dim));
      d.zeta_attr.push_back(Mat<S>::Zero(cfg.hidden_dim, cfg.latent_dim));
    }
    return d;
  }

  static NoiseDraws draw(const ModelSchema& schema, const TrainConfig& cfg, RngStream& rng, bool training) {
    NoiseDraws d = zeros(schema, cfg);
    auto fill = [&rng](Mat<S>& m) {
      for (index_t i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(rng.gaussian());
    };
    for (auto& m : d.eps_node) fill(m);
    for (auto& m : d.eps_attr) fill(m);
    for (auto& m : d.zeta_node) fill(m);
    for (auto& m : d.zeta_attr) fill(m);
    if (training && cfg.dropout > 0) {
      const S keep = static_cast<S>(1.0 - cfg.dropout);
      const index_t widths[2] = {cfg.hidden_dim + cfg.noise_node, cfg.latent_dim};
      for (index_t width : widths) {
        std::vector<Mat<S>> layer;
        for (const auto& t : schema.types) {
          Mat<S> mask(t.count, width);
          for (index_t i = 0; i < mask.size(); ++i)
            mask.data()[i] = rng.uniform() < cfg.dropout ? S(0) : S(1) / keep;
          layer.push_back(std::move(mask));
        }
        d.dropout.push_back(std::move(layer));
      }
    }
    return d;
  }
};

// ---- relation attention HGNN ----

template <class S>
void register_hgnn_layer(ParamStore<S>& params, const ModelSchema& schema, const std::string& prefix, index_t in,
                         index_t out, int heads) {
  for (const auto& dir : schema.directions)
    for (int h = 0; h < heads; ++h) {
      const std::string p = prefix + "." + dir.name + ".h" + std::to_string(h);
      params.add(p + ".weight", out, in);
      params.add(p + ".att", 1, 2 * out);
    }
}

template <class S>
struct AttentionOutput {
  Var<S> message;  // n_self x out
  Var<S> alpha;    // nnz x 1, in adjacency storage order
};

// One attention head over one direction. For the entry (u, v) of `adj`:
//   e_uv  = leaky_relu(att . [W h_u || W h_v])
//   a_uv  = softmax of e_uv over u's neighbors
//   out_u = sum_v a_uv W h_v
// Rows with no neighbors get a zero message.
template <class S>
AttentionOutput<S> relation_attention(const Csr& adj, std::span<const index_t> entry_rows, Var<S> h_self, Var<S> h_nb,
                                      Var<S> weight, Var<S> att) {
  detail::check_shape(h_self.rows() == adj.rows && h_nb.rows() == adj.cols, "relation_attention", h_self.rows(),
                      h_nb.rows(), adj.rows, adj.cols);
  detail::check_shape(h_self.cols() == weight.cols() && h_nb.cols() == weight.cols(), "relation_attention",
                      h_self.rows(), h_self.cols(), weight.rows(), weight.cols());
  detail::check_shape(att.rows() == 1 && att.cols() == 2 * weight.rows(), "relation_attention", att.rows(), att.cols(),
                      1, 2 * weight.rows());
  const index_t out = weight.rows();
  Var<S> wh_self = matmul_nt(h_self, weight);
  Var<S> wh_nb = h_nb.id() == h_self.id() ? wh_self : matmul_nt(h_nb, weight);
  Var<S> score_self = matmul_nt(wh_self, slice_cols(att, 0, out));
  Var<S> score_nb = matmul_nt(wh_nb, slice_cols(att, out, out));
  Var<S> e = leaky_relu(add(gather_rows(score_self, entry_rows), gather_rows(score_nb, std::span<const index_t>(adj.col_idx))),
                        static_cast<S>(kAttentionSlope));
  Var<S> alpha = segment_softmax(e, std::span<const index_t>(adj.row_ptr));
  return {spmm(adj, wh_nb, alpha), alpha};
}

// One HGNN layer: per type, the MEAN over incoming directions of the
// head-averaged attention messages. Returns pre-activation outputs.
template <class S>
std::vector<Var<S>> hgnn_layer(Tape<S>& tape, ParamStore<S>& params, const ModelInputs<S>& in,
                               const std::string& prefix, int heads, index_t out, const std::vector<Var<S>>& h) {
  std::vector<Var<S>> result;
  for (const auto& t : in.schema.types) {
    const auto& incoming = in.incoming[static_cast<std::size_t>(t.id)];
    if (incoming.empty()) {
      result.push_back(tape.constant(Mat<S>::Zero(t.count, out)));
      continue;
    }
    Var<S> acc;
    for (int d : incoming) {
      const auto& dir = in.schema.directions[static_cast<std::size_t>(d)];
      Var<S> heads_sum;
      for (int k = 0; k < heads; ++k) {
        const std::string p = prefix + "." + dir.name + ".h" + std::to_string(k);
        auto att = relation_attention(in.adjacency[static_cast<std::size_t>(d)],
                                      std::span<const index_t>(in.entry_rows[static_cast<std::size_t>(d)]),
                                      h[static_cast<std::size_t>(dir.self_type)], h[static_cast<std::size_t>(dir.nb_type)],
                                      tape.param(params, p + ".weight"), tape.param(params, p + ".att"));
        heads_sum = heads_sum.valid() ? add(heads_sum, att.message) : att.message;
      }
      if (heads > 1) heads_sum = scale(heads_sum, S(1) / static_cast<S>(heads));
      acc = acc.valid() ? add(acc, heads_sum) : heads_sum;
    }
    result.push_back(row_scale(acc, in.relation_mean[static_cast<std::size_t>(t.id)]));
  }
  return result;
}

// ---- node-level encoder ----

template <class S>
void register_node_encoder(ParamStore<S>& params, const ModelSchema& schema, const TrainConfig& cfg) {
  register_hgnn_layer(params, schema, "enc.l0", cfg.hidden_dim + cfg.noise_node, cfg.latent_dim, cfg.heads);
  register_hgnn_layer(params, schema, "enc.l1", cfg.latent_dim, 2 * cfg.latent_dim, cfg.heads);
}

template <class S>
GaussianLatent<S> split_gaussian(Var<S> out, index_t k) {
  return {slice_cols(out, 0, k), clamp(slice_cols(out, k, k), static_cast<S>(kLogvarMin), static_cast<S>(kLogvarMax)), {}};
}

// Two-layer relation-attention HGNN over CONCAT(hidden, eps_node); the second
// layer emits 2k channels split into (mu, logvar).
template <class S>
std::vector<GaussianLatent<S>> node_encode(Tape<S>& tape, ParamStore<S>& params, const ModelInputs<S>& in,
                                           const std::vector<Var<S>>& hidden, const NoiseDraws<S>& noise,
                                           const TrainConfig& cfg) {
  std::vector<Var<S>> h;
  for (std::size_t t = 0; t < hidden.size(); ++t) {
    Var<S> x = cfg.noise_node > 0 ? concat_cols<S>({hidden[t], tape.constant_ref(noise.eps_node[t])}) : hidden[t];
    if (!noise.dropout.empty()) x = mul_const(x, noise.dropout[0][t]);
    h.push_back(x);
  }
  h = hgnn_layer(tape, params, in, "enc.l0", cfg.heads, cfg.latent_dim, h);
  for (std::size_t t = 0; t < h.size(); ++t) {
    h[t] = tanh(h[t]);
    if (!noise.dropout.empty()) h[t] = mul_const(h[t], noise.dropout[1][t]);
  }
  h = hgnn_layer(tape, params, in, "enc.l1", cfg.heads, 2 * cfg.latent_dim, h);
  std::vector<GaussianLatent<S>> latents;
  for (auto& out : h) latents.push_back(split_gaussian(out, cfg.latent_dim));
  return latents;
}

// ---- attribute-level encoder ----

template <class S>
void register_attribute_encoder(ParamStore<S>& params, const ModelSchema& schema, const TrainConfig& cfg) {
  for (const auto& t : schema.types) {
    const std::string p = "attr_enc." + t.name;
    params.add(p + ".w1", cfg.latent_dim, t.count + cfg.noise_attr);
    params.add(p + ".b1", 1, cfg.latent_dim);
    params.add(p + ".w2", 2 * cfg.latent_dim, cfg.latent_dim);
    params.add(p + ".b2", 1, 2 * cfg.latent_dim);
  }
}

// Row l of the input is column l of the type's hidden matrix (attribute l's
// feature vector across nodes) followed by its noise; a tanh MLP maps it to
// (mu_l, logvar_l).
template <class S>
GaussianLatent<S> attribute_encode(Tape<S>& tape, ParamStore<S>& params, const std::string& type_name,
                                   Var<S> hidden, const Mat<S>& eps_attr, index_t k) {
  const std::string p = "attr_enc." + type_name;
  Var<S> x = transpose(hidden);
  if (eps_attr.cols() > 0) x = concat_cols<S>({x, tape.constant_ref(eps_attr)});
  Var<S> w1 = tape.param(params, p + ".w1");
  detail::check_shape(x.cols() == w1.cols(), "attribute_encode", x.rows(), x.cols(), w1.rows(), w1.cols());
  Var<S> h = tanh(add_row(matmul_nt(x, w1), tape.param(params, p + ".b1")));
  Var<S> out = add_row(matmul_nt(h, tape.param(params, p + ".w2")), tape.param(params, p + ".b2"));
  return split_gaussian(out, k);
}

// Reparameterized draw: sample = mu + exp(logvar / 2) * zeta, with zeta fixed.
template <class S>
GaussianLatent<S> sample_latent(GaussianLatent<S> lat, const Mat<S>& zeta) {
  lat.sample = add(lat.mu, mul_const(exp(scale(lat.logvar, S(0.5))), zeta));
  return lat;
}

}  // namespace grami
