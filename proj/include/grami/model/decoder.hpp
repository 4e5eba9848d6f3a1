#pragma once

#include <span>
#include <string>
#include <vector>

#include "grami/model/config.hpp"
#include "grami/model/encoder.hpp"

namespace grami {

// Logit z_u . z_v for each requested pair; the edge probability is its sigmoid.
template <class S>
Var<S> edge_logits(Var<S> z_src, Var<S> z_dst, std::span<const Pair> pairs) {
  return pair_dot(z_src, z_dst, pairs);
}

template <class S>
void register_decoder(ParamStore<S>& params, const ModelSchema& schema, const TrainConfig& cfg) {
  for (int l = 0; l < cfg.decoder_layers; ++l)
    register_hgnn_layer(params, schema, "dec.l" + std::to_string(l), cfg.hidden_dim, cfg.hidden_dim, cfg.heads);
  for (const auto& t : schema.types) {
    if (!t.attributed) continue;
    const std::string p = "raw_dec." + t.name;
    params.add(p + ".w1", cfg.latent_dim, cfg.hidden_dim);
    params.add(p + ".b1", 1, cfg.latent_dim);
    params.add(p + ".w2", t.feature_dim, cfg.latent_dim);
    params.add(p + ".b2", 1, t.feature_dim);
  }
}

// Reconstructed hidden features: per type tanh(Z_node Z_attr^T) (row u uses
// node u's latent), then `layers` relation-attention HGNN layers with tanh.
template <class S>
std::vector<Var<S>> recon_hidden(Tape<S>& tape, ParamStore<S>& params, const ModelInputs<S>& in,
                                 const std::vector<Var<S>>& z_node, const std::vector<Var<S>>& z_attr, int layers,
                                 int heads) {
  std::vector<Var<S>> x;
  for (std::size_t t = 0; t < z_node.size(); ++t) {
    detail::check_shape(z_node[t].cols() == z_attr[t].cols(), "recon_hidden", z_node[t].rows(), z_node[t].cols(),
                        z_attr[t].rows(), z_attr[t].cols());
    x.push_back(tanh(matmul_nt(z_node[t], z_attr[t])));
  }
  for (int l = 0; l < layers; ++l) {
    const index_t width = x.front().cols();
    x = hgnn_layer(tape, params, in, "dec.l" + std::to_string(l), heads, width, x);
    for (auto& v : x) v = tanh(v);
  }
  return x;
}

// Raw-feature reconstruction for one attributed type: linear(tanh(linear(x))).
template <class S>
Var<S> recon_raw(Tape<S>& tape, ParamStore<S>& params, const ModelSchema& schema, Var<S> hidden_recon, int type) {
  const auto& t = schema.types.at(static_cast<std::size_t>(type));
  require(t.attributed, ErrorKind::NotAttributedType, "type '" + t.name + "' has no raw features to reconstruct");
  const std::string p = "raw_dec." + t.name;
  Var<S> h = tanh(add_row(matmul_nt(hidden_recon, tape.param(params, p + ".w1")), tape.param(params, p + ".b1")));
  return add_row(matmul_nt(h, tape.param(params, p + ".w2")), tape.param(params, p + ".b2"));
}

}  // namespace grami
