#pragma once

#include <cmath>
#include <vector>

#include "grami/numeric/tensor.hpp"

namespace grami {

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers mirror the ParamStore entries, so
// the update is the same as one applied over the flat view.
template <class S>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  const AdamOptions& options() const { return options_; }
  long step_count() const { return t_; }

  void step(ParamStore<S>& params) {
    if (m_.empty()) {
      for (const auto& e : params) {
        m_.push_back(Mat<S>::Zero(e.value.rows(), e.value.cols()));
        v_.push_back(Mat<S>::Zero(e.value.rows(), e.value.cols()));
      }
    }
    require(m_.size() == params.size(), ErrorKind::ShapeMismatch, "optimizer state does not match parameters");
    ++t_;
    const S b1 = static_cast<S>(options_.beta1);
    const S b2 = static_cast<S>(options_.beta2);
    const S c1 = static_cast<S>(1.0 - std::pow(options_.beta1, static_cast<double>(t_)));
    const S c2 = static_cast<S>(1.0 - std::pow(options_.beta2, static_cast<double>(t_)));
    const S lr = static_cast<S>(options_.lr);
    const S eps = static_cast<S>(options_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      auto m = m_[i].array();
      auto v = v_[i].array();
      const auto g = p.grad.array();
      m = b1 * m + (S(1) - b1) * g;
      v = b2 * v + (S(1) - b2) * g.square();
      p.value.array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    }
  }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::vector<Mat<S>> m_;
  std::vector<Mat<S>> v_;
};

}  // namespace grami
