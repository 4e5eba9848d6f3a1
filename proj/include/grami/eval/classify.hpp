#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "grami/eval/metrics.hpp"
#include "grami/numeric/rng.hpp"
#include "grami/numeric/tensor.hpp"

namespace grami {

struct ProbeOptions {
  std::vector<double> ratios{0.1, 0.2, 0.4, 0.6, 0.8};
  int runs = 10;
  std::uint64_t seed = 0;
  int threads = 1;
  int iterations = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

struct RatioResult {
  double ratio = 0;
  MeanStd macro_f1;
  MeanStd micro_f1;
};

struct ClassificationReport {
  std::vector<RatioResult> ratios;

  const RatioResult& at(double ratio) const {
    for (const auto& r : ratios)
      if (std::abs(r.ratio - ratio) < 1e-9) return r;
    fail(ErrorKind::Config, "ratio " + std::to_string(ratio) + " not in report");
  }
};

inline void to_json(nlohmann::json& j, const ClassificationReport& r) {
  j = nlohmann::json::array();
  for (const auto& x : r.ratios)
    j.push_back({{"ratio", x.ratio},
                 {"macro_f1", {{"mean", x.macro_f1.mean}, {"std", x.macro_f1.std}}},
                 {"micro_f1", {{"mean", x.micro_f1.mean}, {"std", x.micro_f1.std}}}});
}

// Multinomial logistic regression on standardized inputs, full-batch gradient
// descent with a small L2 penalty.
class LogisticProbe {
 public:
  void fit(const MatD& x, const std::vector<int>& y, int classes, const ProbeOptions& opt) {
    const index_t n = x.rows(), d = x.cols();
    mean_ = x.colwise().mean();
    scale_ = ((x.rowwise() - mean_).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
    for (index_t j = 0; j < d; ++j)
      if (scale_(j) < 1e-12) scale_(j) = 1.0;
    const MatD xs = standardize(x);
    w_ = MatD::Zero(d, classes);
    b_ = Eigen::RowVectorXd::Zero(classes);
    MatD onehot = MatD::Zero(n, classes);
    for (index_t i = 0; i < n; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;
    for (int it = 0; it < opt.iterations; ++it) {
      MatD p = softmax(xs);
      p -= onehot;
      p /= static_cast<double>(n);
      w_ -= opt.learning_rate * (xs.transpose() * p + opt.l2 * w_);
      b_ -= opt.learning_rate * p.colwise().sum();
    }
  }

  std::vector<int> predict(const MatD& x) const {
    const MatD logits = (standardize(x) * w_).rowwise() + b_;
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (index_t i = 0; i < x.rows(); ++i) {
      Eigen::Index arg = 0;
      logits.row(i).maxCoeff(&arg);
      out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
  }

 private:
  MatD standardize(const MatD& x) const {
    return ((x.rowwise() - mean_).array().rowwise() / scale_.array()).matrix();
  }

  MatD softmax(const MatD& xs) const {
    MatD z = (xs * w_).rowwise() + b_;
    for (index_t i = 0; i < z.rows(); ++i) {
      z.row(i).array() -= z.row(i).maxCoeff();
      z.row(i) = z.row(i).array().exp().matrix();
      z.row(i) /= z.row(i).sum();
    }
    return z;
  }

  Eigen::RowVectorXd mean_, scale_, b_;
  MatD w_;
};

namespace detail {

// Per class: round(ratio * size) training rows, clamped so each class keeps at
// least one row on each side.
inline std::pair<std::vector<index_t>, std::vector<index_t>> stratified_split(const std::vector<int>& y, int classes,
                                                                              double ratio, RngStream& rng) {
  std::vector<std::vector<index_t>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < y.size(); ++i) by_class[static_cast<std::size_t>(y[i])].push_back(static_cast<index_t>(i));
  std::vector<index_t> train, test;
  for (auto& members : by_class) {
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.uniform_index(i)]);
    const auto m = static_cast<index_t>(members.size());
    const index_t take = std::clamp<index_t>(static_cast<index_t>(std::llround(ratio * static_cast<double>(m))), 1, m - 1);
    train.insert(train.end(), members.begin(), members.begin() + take);
    test.insert(test.end(), members.begin() + take, members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

inline MatD take_rows(const MatD& x, const std::vector<index_t>& rows) {
  MatD out(static_cast<index_t>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<index_t>(i)) = x.row(rows[i]);
  return out;
}

}  // namespace detail

// Linear probe on frozen embeddings: for every ratio and run, a stratified
// split, a logistic regression on the training part, F1 on the rest.
template <class Derived>
ClassificationReport classify(const Eigen::MatrixBase<Derived>& embeddings, const std::vector<int>& labels,
                              const ProbeOptions& opt = {}) {
  const MatD x = embeddings.template cast<double>();
  require(static_cast<std::size_t>(x.rows()) == labels.size(), ErrorKind::ShapeMismatch,
          "classify: " + std::to_string(labels.size()) + " labels for " + std::to_string(x.rows()) + " rows");
  std::map<int, int> remap;
  for (int l : labels) remap.emplace(l, 0);
  require(remap.size() >= 2, ErrorKind::SingleClass, "classify needs at least two classes");
  int next = 0;
  std::map<int, std::size_t> sizes;
  for (auto& [label, id] : remap) id = next++;
  std::vector<int> y;
  for (int l : labels) {
    y.push_back(remap[l]);
    ++sizes[l];
  }
  for (const auto& [label, size] : sizes)
    require(size >= 2, ErrorKind::TooFewSamples,
            "class " + std::to_string(label) + " has " + std::to_string(size) + " sample(s); a split needs 2");
  for (double r : opt.ratios) require(r > 0 && r < 1, ErrorKind::Config, "training ratios must lie in (0, 1)");
  const int classes = next;

  const std::size_t jobs = opt.ratios.size() * static_cast<std::size_t>(opt.runs);
  std::vector<F1Scores> scores(jobs);
  auto run_job = [&](std::size_t job) {
    const std::size_t ri = job / static_cast<std::size_t>(opt.runs);
    RngStream rng = RngStream(opt.seed).fork(job);
    const auto [train, test] = detail::stratified_split(y, classes, opt.ratios[ri], rng);
    std::vector<int> y_train, y_test;
    for (index_t i : train) y_train.push_back(y[static_cast<std::size_t>(i)]);
    for (index_t i : test) y_test.push_back(y[static_cast<std::size_t>(i)]);
    LogisticProbe probe;
    probe.fit(detail::take_rows(x, train), y_train, classes, opt);
    scores[job] = f1_scores(probe.predict(detail::take_rows(x, test)), y_test);
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(1, opt.threads)), jobs));
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs; ++j) run_job(j);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < jobs; j += workers) run_job(j);
      });
    for (auto& t : pool) t.join();
  }

  ClassificationReport report;
  for (std::size_t ri = 0; ri < opt.ratios.size(); ++ri) {
    std::vector<double> macro, micro;
    for (int r = 0; r < opt.runs; ++r) {
      macro.push_back(scores[ri * static_cast<std::size_t>(opt.runs) + static_cast<std::size_t>(r)].macro);
      micro.push_back(scores[ri * static_cast<std::size_t>(opt.runs) + static_cast<std::size_t>(r)].micro);
    }
    report.ratios.push_back({opt.ratios[ri], mean_std(macro), mean_std(micro)});
  }
  return report;
}

}  // namespace grami
