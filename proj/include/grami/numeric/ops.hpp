#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "grami/numeric/csr.hpp"
#include "grami/numeric/tape.hpp"

// Differentiable kernels over Tape values. Each op computes its forward value
// eagerly and records the adjoint rule as a closure over operand ids.

namespace grami {

// a (m x k) * b (k x n)
template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  detail::check_shape(a.cols() == b.rows(), "matmul", a.rows(), a.cols(), b.rows(), b.cols());
  Mat<S> out = a.value() * b.value();
  return a.tape().record(std::move(out), detail::any_grad({a, b}), [a, b](Tape<S>& t, std::size_t self) {
    const Mat<S>& g = t.grad(self);
    if (a.requires_grad()) a.grad().noalias() += g * b.value().transpose();
    if (b.requires_grad()) b.grad().noalias() += a.value().transpose() * g;
  });
}

// a (m x k) * b^T where b is (n x k)
template <class S>
Var<S> matmul_nt(Var<S> a, Var<S> b) {
  detail::check_shape(a.cols() == b.cols(), "matmul_nt", a.rows(), a.cols(), b.rows(), b.cols());
  Mat<S> out = a.value() * b.value().transpose();
  return a.tape().record(std::move(out), detail::any_grad({a, b}), [a, b](Tape<S>& t, std::size_t self) {
    const Mat<S>& g = t.grad(self);
    if (a.requires_grad()) a.grad().noalias() += g * b.value();
    if (b.requires_grad()) b.grad().noalias() += g.transpose() * a.value();
  });
}

template <class S>
Var<S> transpose(Var<S> a) {
  Mat<S> out = a.value().transpose();
  return a.tape().record(std::move(out), a.requires_grad(), [a](Tape<S>& t, std::size_t self) {
    a.grad() += t.grad(self).transpose();
  });
}

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.rows(), a.cols(), b.rows(), b.cols());
  Mat<S> out = a.value() + b.value();
  return a.tape().record(std::move(out), detail::any_grad({a, b}), [a, b](Tape<S>& t, std::size_t self) {
    if (a.requires_grad()) a.grad() += t.grad(self);
    if (b.requires_grad()) b.grad() += t.grad(self);
  });
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
  detail::check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a.rows(), a.cols(), b.rows(), b.cols());
  Mat<S> out = a.value() - b.value();
  return a.tape().record(std::move(out), detail::any_grad({a, b}), [a, b](Tape<S>& t, std::size_t self) {
    if (a.requires_grad()) a.grad() += t.grad(self);
    if (b.requires_grad()) b.grad() -= t.grad(self);
  });
}

// Elementwise product.
template <class S>
Var<S> mul(Var<S> a, Var<S> b) {
  detail::check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul", a.rows(), a.cols(), b.rows(), b.cols());
  Mat<S> out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), detail::any_grad({a, b}), [a, b](Tape<S>& t, std::size_t self) {
    const Mat<S>& g = t.grad(self);
    if (a.requires_grad()) a.grad() += g.cwiseProduct(b.value());
    if (b.requires_grad()) b.grad() += g.cwiseProduct(a.value());
  });
}

template <class S>
Var<S> scale(Var<S> a, S factor) {
  Mat<S> out = a.value() * factor;
  return a.tape().record(std::move(out), a.requires_grad(), [a, factor](Tape<S>& t, std::size_t self) {
    a.grad() += t.grad(self) * factor;
  });
}

// Adds a 1 x c row vector to every row of a.
template <class S>
Var<S> add_row(Var<S> a, Var<S> bias) {
  detail::check_shape(bias.rows() == 1 && bias.cols() == a.cols(), "add_row", a.rows(), a.cols(), bias.rows(),
                      bias.cols());
  Mat<S> out = a.value().rowwise() + bias.value().row(0);
  return a.tape().record(std::move(out), detail::any_grad({a, bias}), [a, bias](Tape<S>& t, std::size_t self) {
    const Mat<S>& g = t.grad(self);
    if (a.requires_grad()) a.grad() += g;
    if (bias.requires_grad()) bias.grad() += g.colwise().sum();
  });
}

// Multiplies row i of a by the constant factors[i].
template <class S>
Var<S> row_scale(Var<S> a, std::vector<S> factors) {
  require(static_cast<index_t>(factors.size()) == a.rows(), ErrorKind::ShapeMismatch, "row_scale: factor count");
  Mat<S> out = a.value();
  for (index_t i = 0; i < out.rows(); ++i) out.row(i) *= factors[i];
  return a.tape().record(std::move(out), a.requires_grad(),
                         [a, f = std::move(factors)](Tape<S>& t, std::size_t self) {
                           const Mat<S>& g = t.grad(self);
                           for (index_t i = 0; i < g.rows(); ++i) a.grad().row(i) += g.row(i) * f[i];
                         });
}

// Elementwise product with a constant mask (dropout, fixed noise draws).
template <class S>
Var<S> mul_const(Var<S> a, Mat<S> mask) {
  detail::check_shape(a.rows() == mask.rows() && a.cols() == mask.cols(), "mul_const", a.rows(), a.cols(),
                      mask.rows(), mask.cols());
  Mat<S> out = a.value().cwiseProduct(mask);
  return a.tape().record(std::move(out), a.requires_grad(), [a, m = std::move(mask)](Tape<S>& t, std::size_t self) {
    a.grad() += t.grad(self).cwiseProduct(m);
  });
}

template <class S>
Var<S> tanh(Var<S> a) {
  Mat<S> out = a.value().array().tanh().matrix();
  return a.tape().record(std::move(out), a.requires_grad(), [a](Tape<S>& t, std::size_t self) {
    const Mat<S>& y = t.value(self);
    a.grad().array() += t.grad(self).array() * (S(1) - y.array().square());
  });
}

template <class S>
S sigmoid_scalar(S x) {
  // Branches keep exp() from overflowing for large |x|.
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <class S>
Var<S> sigmoid(Var<S> a) {
  Mat<S> out = a.value().unaryExpr([](S x) { return sigmoid_scalar(x); });
  return a.tape().record(std::move(out), a.requires_grad(), [a](Tape<S>& t, std::size_t self) {
    const Mat<S>& y = t.value(self);
    a.grad().array() += t.grad(self).array() * y.array() * (S(1) - y.array());
  });
}

template <class S>
Var<S> leaky_relu(Var<S> a, S slope = S(0.2)) {
  Mat<S> out = a.value().unaryExpr([slope](S x) { return x > S(0) ? x : slope * x; });
  return a.tape().record(std::move(out), a.requires_grad(), [a, slope](Tape<S>& t, std::size_t self) {
    const Mat<S>& x = a.value();
    a.grad().array() += t.grad(self).array() * x.unaryExpr([slope](S v) { return v > S(0) ? S(1) : slope; }).array();
  });
}

template <class S>
Var<S> exp(Var<S> a) {
  Mat<S> out = a.value().array().exp().matrix();
  return a.tape().record(std::move(out), a.requires_grad(), [a](Tape<S>& t, std::size_t self) {
    a.grad().array() += t.grad(self).array() * t.value(self).array();
  });
}

// Clamp with zero gradient outside [lo, hi].
template <class S>
Var<S> clamp(Var<S> a, S lo, S hi) {
  Mat<S> out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape().record(std::move(out), a.requires_grad(), [a, lo, hi](Tape<S>& t, std::size_t self) {
    const Mat<S>& x = a.value();
    a.grad().array() +=
        t.grad(self).array() * x.unaryExpr([lo, hi](S v) { return (v >= lo && v <= hi) ? S(1) : S(0); }).array();
  });
}

template <class S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  require(!parts.empty(), ErrorKind::ShapeMismatch, "concat_cols of nothing");
  const index_t rows = parts.front().rows();
  index_t cols = 0;
  bool grad = false;
  for (const auto& p : parts) {
    detail::check_shape(p.rows() == rows, "concat_cols", rows, 0, p.rows(), p.cols());
    cols += p.cols();
    grad = grad || p.requires_grad();
  }
  Mat<S> out(rows, cols);
  index_t off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return parts.front().tape().record(std::move(out), grad, [parts](Tape<S>& t, std::size_t self) {
    const Mat<S>& g = t.grad(self);
    index_t o = 0;
    for (const auto& p : parts) {
      if (p.requires_grad()) p.grad() += g.middleCols(o, p.cols());
      o += p.cols();
    }
  });
}

template <class S>
Var<S> slice_cols(Var<S> a, index_t begin, index_t count) {
  require(begin >= 0 && count >= 0 && begin + count <= a.cols(), ErrorKind::ShapeMismatch, "slice_cols out of range");
  Mat<S> out = a.value().middleCols(begin, count);
  return a.tape().record(std::move(out), a.requires_grad(), [a, begin, count](Tape<S>& t, std::size_t self) {
    a.grad().middleCols(begin, count) += t.grad(self);
  });
}

// out[i] = a[index[i]]
template <class S>
Var<S> gather_rows(Var<S> a, std::span<const index_t> index) {
  Mat<S> out(static_cast<index_t>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < a.rows(), ErrorKind::IndexOutOfRange, "gather_rows index");
    out.row(static_cast<index_t>(i)) = a.value().row(index[i]);
  }
  return a.tape().record(std::move(out), a.requires_grad(),
                         [a, idx = std::vector<index_t>(index.begin(), index.end())](Tape<S>& t, std::size_t self) {
                           const Mat<S>& g = t.grad(self);
                           Mat<S>& ga = a.grad();
                           for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<index_t>(i));
                         });
}

// out[p] = <a[u_p], b[v_p]> as a column vector; only the requested pairs are
// evaluated.
template <class S>
Var<S> pair_dot(Var<S> a, Var<S> b, std::span<const Pair> pairs) {
  detail::check_shape(a.cols() == b.cols(), "pair_dot", a.rows(), a.cols(), b.rows(), b.cols());
  Mat<S> out(static_cast<index_t>(pairs.size()), 1);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [u, v] = pairs[p];
    require(u >= 0 && u < a.rows() && v >= 0 && v < b.rows(), ErrorKind::IndexOutOfRange,
            "pair (" + std::to_string(u) + "," + std::to_string(v) + ") outside latent rows");
    out(static_cast<index_t>(p), 0) = a.value().row(u).dot(b.value().row(v));
  }
  return a.tape().record(std::move(out), detail::any_grad({a, b}),
                         [a, b, ps = std::vector<Pair>(pairs.begin(), pairs.end())](Tape<S>& t, std::size_t self) {
                           const Mat<S>& g = t.grad(self);
                           for (std::size_t p = 0; p < ps.size(); ++p) {
                             const auto [u, v] = ps[p];
                             const S gp = g(static_cast<index_t>(p), 0);
                             if (a.requires_grad()) a.grad().row(u) += gp * b.value().row(v);
                             if (b.requires_grad()) b.grad().row(v) += gp * a.value().row(u);
                           }
                         });
}

// Softmax over contiguous segments of a column vector of per-entry scores,
// where segment r spans [row_ptr[r], row_ptr[r+1]). Empty segments are
// skipped. Max-subtracted for stability.
template <class S>
Var<S> segment_softmax(Var<S> scores, std::span<const index_t> row_ptr) {
  require(scores.cols() == 1, ErrorKind::ShapeMismatch, "segment_softmax expects a column of scores");
  require(!row_ptr.empty() && row_ptr.back() == scores.rows(), ErrorKind::ShapeMismatch,
          "segment_softmax: row_ptr does not cover scores");
  const Mat<S>& x = scores.value();
  Mat<S> out(x.rows(), 1);
  for (std::size_t r = 0; r + 1 < row_ptr.size(); ++r) {
    const index_t b = row_ptr[r], e = row_ptr[r + 1];
    if (b == e) continue;
    S m = x(b, 0);
    for (index_t i = b + 1; i < e; ++i) m = std::max(m, x(i, 0));
    S z = 0;
    for (index_t i = b; i < e; ++i) z += (out(i, 0) = std::exp(x(i, 0) - m));
    for (index_t i = b; i < e; ++i) out(i, 0) /= z;
  }
  return scores.tape().record(
      std::move(out), scores.requires_grad(),
      [scores, rp = std::vector<index_t>(row_ptr.begin(), row_ptr.end())](Tape<S>& t, std::size_t self) {
        const Mat<S>& y = t.value(self);
        const Mat<S>& g = t.grad(self);
        Mat<S>& gs = scores.grad();
        for (std::size_t r = 0; r + 1 < rp.size(); ++r) {
          S dot = 0;
          for (index_t i = rp[r]; i < rp[r + 1]; ++i) dot += y(i, 0) * g(i, 0);
          for (index_t i = rp[r]; i < rp[r + 1]; ++i) gs(i, 0) += y(i, 0) * (g(i, 0) - dot);
        }
      });
}

// Dense row-wise softmax restricted to the sparsity pattern of `support`;
// entries outside the support are exactly zero.
template <class S>
Var<S> softmax_rows_masked(Var<S> scores, const Csr& support) {
  detail::check_shape(scores.rows() == support.rows && scores.cols() == support.cols, "softmax_rows_masked",
                      scores.rows(), scores.cols(), support.rows, support.cols);
  for (index_t r = 0; r < support.rows; ++r)
    require(support.degree(r) > 0, ErrorKind::EmptySupport, "row " + std::to_string(r) + " has no supported entry");
  Tape<S>& t = scores.tape();
  // Flatten supported entries to a column, run the segment kernel, scatter back.
  std::vector<index_t> flat(support.col_idx.size());
  for (index_t r = 0; r < support.rows; ++r)
    for (index_t e = support.row_ptr[r]; e < support.row_ptr[r + 1]; ++e) flat[e] = r * support.cols + support.col_idx[e];
  Mat<S> picked(static_cast<index_t>(flat.size()), 1);
  for (std::size_t i = 0; i < flat.size(); ++i) picked(static_cast<index_t>(i), 0) = scores.value().data()[flat[i]];
  Var<S> column = t.record(std::move(picked), scores.requires_grad(), [scores, flat](Tape<S>& tp, std::size_t self) {
    const Mat<S>& g = tp.grad(self);
    for (std::size_t i = 0; i < flat.size(); ++i) scores.grad().data()[flat[i]] += g(static_cast<index_t>(i), 0);
  });
  Var<S> probs = segment_softmax(column, std::span<const index_t>(support.row_ptr));
  Mat<S> out = Mat<S>::Zero(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < flat.size(); ++i) out.data()[flat[i]] = probs.value()(static_cast<index_t>(i), 0);
  return t.record(std::move(out), probs.requires_grad(), [probs, flat](Tape<S>& tp, std::size_t self) {
    const Mat<S>& g = tp.grad(self);
    for (std::size_t i = 0; i < flat.size(); ++i) probs.grad()(static_cast<index_t>(i), 0) += g.data()[flat[i]];
  });
}

// Sparse-dense product out = A * h with A binary (or weighted by the per-entry
// column `weights`, in storage order). Cost O(nnz * cols).
template <class S>
Var<S> spmm(const Csr& a, Var<S> h, Var<S> weights = {}) {
  detail::check_shape(h.rows() == a.cols, "spmm", a.rows, a.cols, h.rows(), h.cols());
  const bool weighted = weights.valid();
  if (weighted)
    require(weights.rows() == a.nnz() && weights.cols() == 1, ErrorKind::ShapeMismatch, "spmm: weights per entry");
  const Mat<S>& hv = h.value();
  Mat<S> out = Mat<S>::Zero(a.rows, hv.cols());
  for (index_t r = 0; r < a.rows; ++r)
    for (index_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e) {
      if (weighted)
        out.row(r) += weights.value()(e, 0) * hv.row(a.col_idx[e]);
      else
        out.row(r) += hv.row(a.col_idx[e]);
    }
  const bool grad = h.requires_grad() || (weighted && weights.requires_grad());
  return h.tape().record(std::move(out), grad, [&a, h, weights, weighted](Tape<S>& t, std::size_t self) {
    const Mat<S>& g = t.grad(self);
    for (index_t r = 0; r < a.rows; ++r)
      for (index_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e) {
        const index_t c = a.col_idx[e];
        if (h.requires_grad()) {
          if (weighted)
            h.grad().row(c) += weights.value()(e, 0) * g.row(r);
          else
            h.grad().row(c) += g.row(r);
        }
        if (weighted && weights.requires_grad()) weights.grad()(e, 0) += g.row(r).dot(h.value().row(c));
      }
  });
}

// A^T * h, by scattering through the same pattern.
template <class S>
Var<S> spmm_transposed(const Csr& a, Var<S> h) {
  detail::check_shape(h.rows() == a.rows, "spmm_transposed", a.rows, a.cols, h.rows(), h.cols());
  const Mat<S>& hv = h.value();
  Mat<S> out = Mat<S>::Zero(a.cols, hv.cols());
  for (index_t r = 0; r < a.rows; ++r)
    for (index_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e) out.row(a.col_idx[e]) += hv.row(r);
  return h.tape().record(std::move(out), h.requires_grad(), [&a, h](Tape<S>& t, std::size_t self) {
    const Mat<S>& g = t.grad(self);
    for (index_t r = 0; r < a.rows; ++r)
      for (index_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e) h.grad().row(r) += g.row(a.col_idx[e]);
  });
}

// ---- reductions to 1x1 ----

template <class S>
Var<S> sum(Var<S> a) {
  Mat<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), a.requires_grad(), [a](Tape<S>& t, std::size_t self) {
    a.grad().array() += t.grad(self)(0, 0);
  });
}

template <class S>
Var<S> sum_squares(Var<S> a) {
  Mat<S> out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.tape().record(std::move(out), a.requires_grad(), [a](Tape<S>& t, std::size_t self) {
    a.grad() += S(2) * t.grad(self)(0, 0) * a.value();
  });
}

// Mean squared difference over all entries.
template <class S>
Var<S> mse(Var<S> a, Var<S> b) {
  detail::check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mse", a.rows(), a.cols(), b.rows(), b.cols());
  const S n = static_cast<S>(std::max<index_t>(1, a.value().size()));
  Mat<S> out(1, 1);
  out(0, 0) = (a.value() - b.value()).squaredNorm() / n;
  return a.tape().record(std::move(out), detail::any_grad({a, b}), [a, b, n](Tape<S>& t, std::size_t self) {
    const S g = t.grad(self)(0, 0) * S(2) / n;
    if (a.requires_grad()) a.grad() += g * (a.value() - b.value());
    if (b.requires_grad()) b.grad() -= g * (a.value() - b.value());
  });
}

template <class S>
Var<S> sqrt(Var<S> a) {
  require(a.rows() == 1 && a.cols() == 1, ErrorKind::ShapeMismatch, "sqrt expects a scalar");
  Mat<S> out(1, 1);
  out(0, 0) = std::sqrt(a.item());
  return a.tape().record(std::move(out), a.requires_grad(), [a](Tape<S>& t, std::size_t self) {
    const S y = t.value(self)(0, 0);
    // d sqrt(x)/dx is unbounded at 0; the subgradient 0 is used there.
    if (y > S(0)) a.grad()(0, 0) += t.grad(self)(0, 0) / (S(2) * y);
  });
}

// Mean binary cross-entropy from logits against constant 0/1 labels.
template <class S>
Var<S> bce_with_logits(Var<S> logits, std::vector<S> labels) {
  require(logits.cols() == 1 && static_cast<index_t>(labels.size()) == logits.rows(), ErrorKind::ShapeMismatch,
          "bce_with_logits: one label per logit");
  const Mat<S>& x = logits.value();
  const S n = static_cast<S>(std::max<index_t>(1, x.rows()));
  S total = 0;
  for (index_t i = 0; i < x.rows(); ++i) {
    const S v = x(i, 0);
    // softplus(v) - y v, written to stay finite for large |v|
    total += std::max(v, S(0)) + std::log1p(std::exp(-std::abs(v))) - labels[i] * v;
  }
  Mat<S> out(1, 1);
  out(0, 0) = total / n;
  return logits.tape().record(std::move(out), logits.requires_grad(),
                              [logits, y = std::move(labels), n](Tape<S>& t, std::size_t self) {
                                const S g = t.grad(self)(0, 0) / n;
                                const Mat<S>& x = logits.value();
                                for (index_t i = 0; i < x.rows(); ++i)
                                  logits.grad()(i, 0) += g * (sigmoid_scalar(x(i, 0)) - y[i]);
                              });
}

// KL(N(mu, exp(logvar)) || N(0, 1)) summed over entries, divided by the row count.
template <class S>
Var<S> gaussian_kl(Var<S> mu, Var<S> logvar) {
  detail::check_shape(mu.rows() == logvar.rows() && mu.cols() == logvar.cols(), "gaussian_kl", mu.rows(), mu.cols(),
                      logvar.rows(), logvar.cols());
  const S rows = static_cast<S>(std::max<index_t>(1, mu.rows()));
  const auto m = mu.value().array();
  const auto lv = logvar.value().array();
  Mat<S> out(1, 1);
  out(0, 0) = S(0.5) * (lv.exp() + m.square() - S(1) - lv).sum() / rows;
  return mu.tape().record(std::move(out), detail::any_grad({mu, logvar}), [mu, logvar, rows](Tape<S>& t, std::size_t self) {
    const S g = t.grad(self)(0, 0) / rows;
    if (mu.requires_grad()) mu.grad() += g * mu.value();
    if (logvar.requires_grad()) logvar.grad().array() += g * S(0.5) * (logvar.value().array().exp() - S(1));
  });
}

}  // namespace grami
