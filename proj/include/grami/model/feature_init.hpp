#pragma once

#include <string>
#include <vector>

#include "grami/model/inputs.hpp"
#include "grami/numeric/ops.hpp"

namespace grami {

// Type-specific projection into the shared hidden space.
//   attributed type:     proj.<type>.weight (hidden x d_i), proj.<type>.bias (1 x hidden)
//   non-attributed type: proj.<type>.table  (n_i x hidden), proj.<type>.bias
// The table row of node u is W_T applied to u's one-hot vector, so the
// identity matrix is never formed.
template <class S>
void register_projection(ParamStore<S>& params, const ModelSchema& schema, index_t hidden_dim) {
  for (const auto& t : schema.types) {
    const std::string p = "proj." + t.name;
    if (t.attributed) {
      require(hidden_dim < t.feature_dim, ErrorKind::Config,
              "hidden_dim " + std::to_string(hidden_dim) + " must be below the feature dimension " +
                  std::to_string(t.feature_dim) + " of type '" + t.name + "'");
      params.add(p + ".weight", hidden_dim, t.feature_dim);
    } else {
      params.add(p + ".table", t.count, hidden_dim);
    }
    params.add(p + ".bias", 1, hidden_dim);
  }
}

// Hidden features per type: tanh(X W^T + b) or tanh(E + b).
template <class S>
std::vector<Var<S>> project(Tape<S>& tape, ParamStore<S>& params, const ModelInputs<S>& in) {
  std::vector<Var<S>> hidden;
  for (const auto& t : in.schema.types) {
    const std::string p = "proj." + t.name;
    Var<S> bias = tape.param(params, p + ".bias");
    Var<S> pre;
    if (t.attributed) {
      const Mat<S>& x = in.features[static_cast<std::size_t>(t.id)];
      Var<S> w = tape.param(params, p + ".weight");
      detail::check_shape(x.cols() == w.cols(), "project", x.rows(), x.cols(), w.rows(), w.cols());
      pre = matmul_nt(tape.constant_ref(x), w);
    } else {
      pre = tape.param(params, p + ".table");
      detail::check_shape(pre.rows() == t.count, "project", pre.rows(), pre.cols(), t.count, bias.cols());
    }
    hidden.push_back(tanh(add_row(pre, bias)));
  }
  return hidden;
}

}  // namespace grami
