#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "grami/error.hpp"
#include "grami/numeric/tensor.hpp"

namespace grami {

template <class S>
class Tape;

// Handle to a value recorded on a tape.
template <class S>
class Var {
 public:
  Var() = default;
  Var(Tape<S>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  std::size_t id() const { return id_; }
  Tape<S>& tape() const { return *tape_; }

  const Mat<S>& value() const { return tape_->value(id_); }
  index_t rows() const { return value().rows(); }
  index_t cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  Mat<S>& grad() const { return tape_->grad(id_); }

  // Scalar value of a 1x1 result.
  S item() const { return value()(0, 0); }

 private:
  Tape<S>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Recorded reverse pass over one forward computation. The tape owns every
// intermediate; parameters are referenced in place and their gradients are
// accumulated into the owning ParamStore when backward() finishes.
template <class S>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> constant(Mat<S> value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, false, {}, nullptr, 0});
    return {this, nodes_.size() - 1};
  }

  // Constant referenced in place; `value` must outlive the tape.
  Var<S> constant_ref(const Mat<S>& value) {
    nodes_.push_back(Node{{}, {}, &value, false, {}, nullptr, 0});
    return {this, nodes_.size() - 1};
  }

  Var<S> param(ParamStore<S>& store, std::size_t index) {
    nodes_.push_back(Node{{}, {}, &store[index].value, true, {}, &store, index});
    return {this, nodes_.size() - 1};
  }

  Var<S> param(ParamStore<S>& store, const std::string& name) {
    return param(store, store.index_of(name));
  }

  Var<S> record(Mat<S> value, bool requires_grad, BackwardFn backward) {
#ifndef NDEBUG
    require(all_finite(value), ErrorKind::NonFiniteLoss, "non-finite value produced by a forward op");
#endif
    nodes_.push_back(Node{std::move(value), {}, nullptr, requires_grad,
                          requires_grad ? std::move(backward) : BackwardFn{}, nullptr, 0});
    return {this, nodes_.size() - 1};
  }

  const Mat<S>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Mat<S>& grad(std::size_t id) { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and runs the reverse pass.
  void backward(Var<S> root) {
    require(root.rows() == 1 && root.cols() == 1, ErrorKind::ShapeMismatch,
            "backward root must be a scalar, got " + shape_str(root.rows(), root.cols()));
    for (std::size_t i = 0; i <= root.id(); ++i) {
      Node& n = nodes_[i];
      if (n.requires_grad) {
        const Mat<S>& v = value(i);
        n.grad = Mat<S>::Zero(v.rows(), v.cols());
      }
    }
    if (!nodes_[root.id()].requires_grad) return;
    nodes_[root.id()].grad(0, 0) = S(1);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad) continue;
      if (n.backward) n.backward(*this, i);
      if (n.store) (*n.store)[n.param_index].grad += n.grad;
    }
  }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    const Mat<S>* external;
    bool requires_grad;
    BackwardFn backward;
    ParamStore<S>* store;
    std::size_t param_index;
  };

  std::vector<Node> nodes_;
};

namespace detail {

template <class S>
bool any_grad(std::initializer_list<Var<S>> vars) {
  for (const auto& v : vars)
    if (v.requires_grad()) return true;
  return false;
}

inline void check_shape(bool ok, const char* op, index_t r1, index_t c1, index_t r2, index_t c2) {
  require(ok, ErrorKind::ShapeMismatch,
          std::string(op) + ": " + shape_str(r1, c1) + " vs " + shape_str(r2, c2));
}

}  // namespace detail

}  // namespace grami
