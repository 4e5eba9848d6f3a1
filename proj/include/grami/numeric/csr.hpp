#pragma once

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

#include "grami/error.hpp"
#include "grami/numeric/tensor.hpp"

namespace grami {

using Pair = std::pair<index_t, index_t>;

// Binary sparse matrix in compressed-row form. Columns are sorted and unique
// within each row.
struct Csr {
  index_t rows = 0;
  index_t cols = 0;
  std::vector<index_t> row_ptr{0};
  std::vector<index_t> col_idx;

  index_t nnz() const { return static_cast<index_t>(col_idx.size()); }
  index_t degree(index_t r) const { return row_ptr[r + 1] - row_ptr[r]; }

  // Row index of every stored entry, in storage order.
  std::vector<index_t> row_of_entries() const {
    std::vector<index_t> out(col_idx.size());
    for (index_t r = 0; r < rows; ++r)
      for (index_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) out[e] = r;
    return out;
  }

  bool contains(index_t r, index_t c) const {
    auto first = col_idx.begin() + row_ptr[r];
    auto last = col_idx.begin() + row_ptr[r + 1];
    return std::binary_search(first, last, c);
  }

  // Duplicates are dropped; indices must already be in range.
  static Csr from_pairs(index_t rows, index_t cols, std::vector<Pair> pairs) {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    Csr m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    m.col_idx.reserve(pairs.size());
    for (const auto& [r, c] : pairs) {
      require(r >= 0 && r < rows && c >= 0 && c < cols, ErrorKind::IndexOutOfRange,
              "entry (" + std::to_string(r) + "," + std::to_string(c) + ") outside " +
                  shape_str(rows, cols));
      ++m.row_ptr[r + 1];
      m.col_idx.push_back(c);
    }
    std::partial_sum(m.row_ptr.begin(), m.row_ptr.end(), m.row_ptr.begin());
    return m;
  }

  std::vector<Pair> pairs() const {
    std::vector<Pair> out;
    out.reserve(col_idx.size());
    for (index_t r = 0; r < rows; ++r)
      for (index_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) out.emplace_back(r, col_idx[e]);
    return out;
  }

  Csr transpose() const {
    std::vector<Pair> t;
    t.reserve(col_idx.size());
    for (const auto& [r, c] : pairs()) t.emplace_back(c, r);
    return from_pairs(cols, rows, std::move(t));
  }

  template <class S>
  Mat<S> to_dense() const {
    Mat<S> d = Mat<S>::Zero(rows, cols);
    for (const auto& [r, c] : pairs()) d(r, c) = S(1);
    return d;
  }

  friend bool operator==(const Csr&, const Csr&) = default;
};

}  // namespace grami
