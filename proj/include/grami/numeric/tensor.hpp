#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "grami/error.hpp"

namespace grami {

using index_t = std::int64_t;

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatF = Mat<float>;
using MatD = Mat<double>;

inline std::string shape_str(index_t rows, index_t cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

template <class S>
bool all_finite(const Mat<S>& m) {
  return m.array().isFinite().all();
}

// Named learnable tensors in a fixed registration order. The flat view walks
// the entries in that order, row-major, so a name maps to the same slice on
// every run.
template <class S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Mat<S> value;
    Mat<S> grad;
  };

  std::size_t add(const std::string& name, index_t rows, index_t cols) {
    require(!index_.contains(name), ErrorKind::Config, "duplicate parameter name " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, Mat<S>::Zero(rows, cols), Mat<S>::Zero(rows, cols)});
    return entries_.size() - 1;
  }

  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::ShapeMismatch, "unknown parameter " + name);
    return it->second;
  }

  Entry& operator[](std::size_t i) { return entries_[i]; }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Entry& at(const std::string& name) { return entries_[index_of(name)]; }
  const Entry& at(const std::string& name) const { return entries_[index_of(name)]; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t flat_size() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  std::vector<S> flat_values() const { return flatten([](const Entry& e) -> const Mat<S>& { return e.value; }); }
  std::vector<S> flat_grads() const { return flatten([](const Entry& e) -> const Mat<S>& { return e.grad; }); }

  void assign_flat(std::span<const S> flat) {
    require(flat.size() == flat_size(), ErrorKind::ShapeMismatch, "flat view length mismatch");
    std::size_t off = 0;
    for (auto& e : entries_) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), e.value.size(), e.value.data());
      off += static_cast<std::size_t>(e.value.size());
    }
  }

  // Scalar at a flat coordinate, for finite-difference probes.
  S& flat_at(std::size_t i) {
    for (auto& e : entries_) {
      const auto n = static_cast<std::size_t>(e.value.size());
      if (i < n) return e.value.data()[i];
      i -= n;
    }
    fail(ErrorKind::IndexOutOfRange, "flat index past end of parameter store");
  }

  // Name owning a flat coordinate.
  const std::string& name_at(std::size_t i) const {
    for (const auto& e : entries_) {
      const auto n = static_cast<std::size_t>(e.value.size());
      if (i < n) return e.name;
      i -= n;
    }
    fail(ErrorKind::IndexOutOfRange, "flat index past end of parameter store");
  }

  void zero_grad() {
    for (auto& e : entries_) e.grad.setZero();
  }

  template <class T>
  ParamStore<T> cast() const {
    ParamStore<T> out;
    for (const auto& e : entries_) {
      auto i = out.add(e.name, e.value.rows(), e.value.cols());
      out[i].value = e.value.template cast<T>();
    }
    return out;
  }

 private:
  template <class F>
  std::vector<S> flatten(F field) const {
    std::vector<S> out;
    out.reserve(flat_size());
    for (const auto& e : entries_) {
      const Mat<S>& m = field(e);
      out.insert(out.end(), m.data(), m.data() + m.size());
    }
    return out;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace grami
