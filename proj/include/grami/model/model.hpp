#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "grami/model/config.hpp"
#include "grami/model/decoder.hpp"
#include "grami/model/encoder.hpp"
#include "grami/model/feature_init.hpp"
#include "grami/model/inputs.hpp"
#include "grami/model/loss.hpp"

namespace grami {

template <class S>
struct ForwardResult {
  std::vector<Var<S>> hidden;               // projected features per type
  std::vector<GaussianLatent<S>> node;      // node latents per type
  std::vector<GaussianLatent<S>> attr;      // attribute latents per type
  std::vector<Var<S>> recon_hidden;         // per type
  std::vector<Var<S>> recon_raw;            // per type; invalid for non-attributed types
};

// Positive and negative pairs per relation id.
struct EdgeBatch {
  std::vector<std::vector<Pair>> positives;
  std::vector<std::vector<Pair>> negatives;
};

inline bool is_bias_name(const std::string& name) {
  auto ends_with = [&name](const std::string& s) {
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  return ends_with(".bias") || ends_with(".b1") || ends_with(".b2");
}

// The full generative model: projection, node and attribute encoders,
// edge/hidden/raw decoders. Parameters are registered in a fixed order
// derived from the schema, so equal schemas give equal flat views.
template <class S>
class GramiModel {
 public:
  GramiModel(ModelSchema schema, TrainConfig cfg) : schema_(std::move(schema)), cfg_(std::move(cfg)) {
    cfg_.validate();
    register_projection(params_, schema_, cfg_.hidden_dim);
    register_node_encoder(params_, schema_, cfg_);
    register_attribute_encoder(params_, schema_, cfg_);
    register_decoder(params_, schema_, cfg_);
  }

  const ModelSchema& schema() const { return schema_; }
  const TrainConfig& config() const { return cfg_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }

  // Xavier-uniform for every weight, table and attention vector; zero biases.
  void initialize(RngStream& rng) {
    for (auto& e : params_) {
      if (is_bias_name(e.name)) {
        e.value.setZero();
        continue;
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(e.value.rows() + e.value.cols()));
      for (index_t i = 0; i < e.value.size(); ++i)
        e.value.data()[i] = static_cast<S>((2.0 * rng.uniform() - 1.0) * bound);
    }
  }

  // Copies tensors by name, checking that names and shapes match exactly.
  template <class T>
  void load_params(const ParamStore<T>& source) {
    require(source.size() == params_.size(), ErrorKind::ShapeMismatch,
            "checkpoint holds " + std::to_string(source.size()) + " tensors, model expects " +
                std::to_string(params_.size()));
    for (auto& e : params_) {
      require(source.contains(e.name), ErrorKind::ShapeMismatch, "tensor '" + e.name + "' missing from checkpoint");
      const auto& src = source.at(e.name).value;
      require(src.rows() == e.value.rows() && src.cols() == e.value.cols(), ErrorKind::ShapeMismatch,
              "tensor '" + e.name + "' is " + shape_str(src.rows(), src.cols()) + ", model expects " +
                  shape_str(e.value.rows(), e.value.cols()));
      e.value = src.template cast<S>();
    }
  }

  ForwardResult<S> forward(Tape<S>& tape, const ModelInputs<S>& in, const NoiseDraws<S>& noise, bool decode = true) {
    require(in.schema.types == schema_.types && in.schema.directions.size() == schema_.directions.size(),
            ErrorKind::ShapeMismatch, "graph schema does not match the model");
    ForwardResult<S> r;
    r.hidden = project(tape, params_, in);
    r.node = node_encode(tape, params_, in, r.hidden, noise, cfg_);
    for (std::size_t t = 0; t < r.node.size(); ++t) r.node[t] = sample_latent(r.node[t], noise.zeta_node[t]);
    if (!decode) return r;
    for (const auto& t : schema_.types) {
      const auto i = static_cast<std::size_t>(t.id);
      r.attr.push_back(sample_latent(
          attribute_encode(tape, params_, t.name, r.hidden[i], noise.eps_attr[i], cfg_.latent_dim), noise.zeta_attr[i]));
    }
    std::vector<Var<S>> zv, za;
    for (std::size_t t = 0; t < r.node.size(); ++t) {
      zv.push_back(r.node[t].sample);
      za.push_back(r.attr[t].sample);
    }
    r.recon_hidden = recon_hidden(tape, params_, in, zv, za, cfg_.decoder_layers, cfg_.heads);
    r.recon_raw.resize(schema_.types.size());
    for (const auto& t : schema_.types)
      if (t.attributed)
        r.recon_raw[static_cast<std::size_t>(t.id)] = recon_raw(tape, params_, schema_, r.recon_hidden[t.id], t.id);
    return r;
  }

  // Per-relation BCE on the given pairs plus all regularizers.
  LossTerms<S> loss(Tape<S>& tape, const ForwardResult<S>& fw, const ModelInputs<S>& in, const EdgeBatch& batch) const {
    LossTerms<S> c;
    c.per_relation = relation_losses(fw, batch);
    c.edge_bce = edge_loss(c.per_relation);
    const KlNorm norm = cfg_.kl_norm == "rows" ? KlNorm::Rows : KlNorm::RowsSquared;
    c.edge_kl = latent_kl(fw.node, norm);
    c.attr_recon = attr_loss(fw.recon_hidden, fw.hidden);
    c.attr_kl = latent_kl(fw.attr, norm);
    c.rmse = rmse_loss(tape, fw.recon_raw, in.features, schema_);
    c.total = total_loss(c, weights());
    return c;
  }

  std::vector<Var<S>> relation_losses(const ForwardResult<S>& fw, const EdgeBatch& batch) const {
    require(batch.positives.size() == schema_.relations.size() && batch.negatives.size() == schema_.relations.size(),
            ErrorKind::ShapeMismatch, "edge batch does not cover every relation");
    std::vector<Var<S>> out;
    for (std::size_t r = 0; r < schema_.relations.size(); ++r) {
      const auto& rel = schema_.relations[r];
      require(batch.positives[r].size() == batch.negatives[r].size(), ErrorKind::ShapeMismatch,
              "relation '" + rel.name + "' needs as many negatives as positives");
      out.push_back(relation_bce(fw.node[static_cast<std::size_t>(rel.src_type)].sample,
                                 fw.node[static_cast<std::size_t>(rel.dst_type)].sample,
                                 std::span<const Pair>(batch.positives[r]), std::span<const Pair>(batch.negatives[r])));
    }
    return out;
  }

  LossWeights weights() const { return {cfg_.lambda1, cfg_.lambda2, cfg_.edge_loss ? 1.0 : 0.0}; }

  std::vector<std::string> relation_names() const {
    std::vector<std::string> names;
    for (const auto& r : schema_.relations) names.push_back(r.name);
    return names;
  }

 private:
  ModelSchema schema_;
  TrainConfig cfg_;
  ParamStore<S> params_;
};

}  // namespace grami
