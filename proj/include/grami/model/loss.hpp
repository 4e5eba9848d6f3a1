#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "grami/model/encoder.hpp"

namespace grami {

struct LossWeights {
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double edge = 1.0;

  void validate() const {
    require(lambda1 >= 0 && lambda1 <= 1 && lambda2 >= 0 && lambda2 <= 1, ErrorKind::Config,
            "loss weights must lie in [0, 1]");
  }
};

struct LossReport {
  double edge_bce = 0;
  double edge_kl = 0;
  double attr_recon = 0;
  double attr_kl = 0;
  double rmse = 0;
  double total = 0;
  std::vector<std::pair<std::string, double>> per_relation;  // edge BCE per relation
};

inline void to_json(nlohmann::json& j, const LossReport& r) {
  j = nlohmann::json{{"edge_bce", r.edge_bce}, {"edge_kl", r.edge_kl}, {"attr_recon", r.attr_recon},
                     {"attr_kl", r.attr_kl},   {"rmse", r.rmse},       {"total", r.total}};
  nlohmann::json rel = nlohmann::json::object();
  for (const auto& [name, v] : r.per_relation) rel[name] = v;
  j["per_relation"] = rel;
}

// total = edge (edge_bce + edge_kl) + lambda1 (attr_recon + attr_kl) + lambda2 rmse
inline LossReport assemble_report(double edge_bce, double edge_kl, double attr_recon, double attr_kl, double rmse,
                                  const LossWeights& w) {
  LossReport r;
  r.edge_bce = edge_bce;
  r.edge_kl = edge_kl;
  r.attr_recon = attr_recon;
  r.attr_kl = attr_kl;
  r.rmse = rmse;
  r.total = w.edge * (edge_bce + edge_kl) + w.lambda1 * (attr_recon + attr_kl) + w.lambda2 * rmse;
  return r;
}

// Mean BCE of one relation over its positives (label 1) then negatives (label 0).
template <class S>
Var<S> relation_bce(Var<S> z_src, Var<S> z_dst, std::span<const Pair> positives, std::span<const Pair> negatives) {
  std::vector<Pair> pairs(positives.begin(), positives.end());
  pairs.insert(pairs.end(), negatives.begin(), negatives.end());
  std::vector<S> labels(pairs.size(), S(0));
  std::fill_n(labels.begin(), positives.size(), S(1));
  return bce_with_logits(pair_dot(z_src, z_dst, std::span<const Pair>(pairs)), std::move(labels));
}

// Sum over relations of their mean BCE.
template <class S>
Var<S> edge_loss(const std::vector<Var<S>>& per_relation) {
  require(!per_relation.empty(), ErrorKind::ShapeMismatch, "edge_loss over no relations");
  Var<S> total = per_relation.front();
  for (std::size_t i = 1; i < per_relation.size(); ++i) total = add(total, per_relation[i]);
  return total;
}

enum class KlNorm { Rows, RowsSquared };

// KL of every row of every latent against N(0, I), divided by the total row
// count N (Rows) or by N^2 (RowsSquared, the usual graph-VAE scaling that
// keeps the prior from swamping a per-pair mean likelihood).
template <class S>
Var<S> latent_kl(const std::vector<GaussianLatent<S>>& latents, KlNorm norm = KlNorm::Rows) {
  index_t rows = 0;
  for (const auto& l : latents) rows += l.mu.rows();
  const S denom = static_cast<S>(rows) * (norm == KlNorm::RowsSquared ? static_cast<S>(rows) : S(1));
  Var<S> total;
  for (const auto& l : latents) {
    Var<S> part = scale(gaussian_kl(l.mu, l.logvar), static_cast<S>(l.mu.rows()) / denom);
    total = total.valid() ? add(total, part) : part;
  }
  return total;
}

// Sum over types of the mean squared error between reconstructed and actual
// hidden features. Gradients reach both sides.
template <class S>
Var<S> attr_loss(const std::vector<Var<S>>& recon, const std::vector<Var<S>>& hidden) {
  require(recon.size() == hidden.size() && !recon.empty(), ErrorKind::ShapeMismatch, "attr_loss: type count");
  Var<S> total;
  for (std::size_t t = 0; t < recon.size(); ++t) {
    Var<S> part = mse(recon[t], hidden[t]);
    total = total.valid() ? add(total, part) : part;
  }
  return total;
}

// sqrt((1/|T+|) sum_i ||X'_i - X_i||_F^2) over the attributed types.
// `recon[t]` must be valid exactly for attributed t.
template <class S>
Var<S> rmse_loss(Tape<S>& tape, const std::vector<Var<S>>& recon, const std::vector<Mat<S>>& features,
                 const ModelSchema& schema) {
  Var<S> total;
  std::size_t attributed = 0;
  for (const auto& t : schema.types) {
    const auto i = static_cast<std::size_t>(t.id);
    const bool have = i < recon.size() && recon[i].valid();
    require(have == t.attributed, ErrorKind::MissingType,
            "raw reconstruction for type '" + t.name + (t.attributed ? "' is missing" : "' must not exist"));
    if (!t.attributed) continue;
    ++attributed;
    Var<S> part = sum_squares(sub(recon[i], tape.constant_ref(features[i])));
    total = total.valid() ? add(total, part) : part;
  }
  if (attributed == 0) return tape.constant(Mat<S>::Zero(1, 1));
  return sqrt(scale(total, S(1) / static_cast<S>(attributed)));
}

template <class S>
struct LossTerms {
  std::vector<Var<S>> per_relation;
  Var<S> edge_bce, edge_kl, attr_recon, attr_kl, rmse, total;

  LossReport report(const std::vector<std::string>& relation_names, const LossWeights& w) const {
    LossReport r = assemble_report(edge_bce.item(), edge_kl.item(), attr_recon.item(), attr_kl.item(), rmse.item(), w);
    r.total = total.item();
    for (std::size_t i = 0; i < per_relation.size(); ++i) r.per_relation.emplace_back(relation_names[i], per_relation[i].item());
    return r;
  }
};

template <class S>
Var<S> total_loss(const LossTerms<S>& c, const LossWeights& w) {
  Var<S> edge = scale(add(c.edge_bce, c.edge_kl), static_cast<S>(w.edge));
  Var<S> attr = scale(add(c.attr_recon, c.attr_kl), static_cast<S>(w.lambda1));
  return add(add(edge, attr), scale(c.rmse, static_cast<S>(w.lambda2)));
}

}  // namespace grami
