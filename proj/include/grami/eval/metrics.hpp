#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "grami/error.hpp"

namespace grami {

// Mann-Whitney statistic: probability that a random positive outranks a
// random negative, ties counted half.
inline double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), ErrorKind::ShapeMismatch, "auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of 1-based ranks i+1..j
    for (std::size_t m = i; m < j; ++m)
      if (labels[order[m]]) rank_sum += mid_rank;
    i = j;
  }
  for (int l : labels) (l ? pos : neg) += 1;
  require(pos > 0 && neg > 0, ErrorKind::EmptyTestSet, "auc needs both positives and negatives");
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

// Step-sum average precision: sum over distinct thresholds (descending) of
// precision times the recall increment.
inline double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), ErrorKind::ShapeMismatch, "ap: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double total_pos = 0;
  for (int l : labels) total_pos += l ? 1 : 0;
  require(total_pos > 0, ErrorKind::EmptyTestSet, "ap needs at least one positive");
  double tp = 0, seen = 0, ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += labels[order[j]] ? 1 : 0;
      ++j;
    }
    seen = static_cast<double>(j);
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

struct F1Scores {
  double macro = 0;
  double micro = 0;
};

// Classes are those present in either vector. Micro-F1 of single-label
// predictions equals accuracy.
inline F1Scores f1_scores(const std::vector<int>& predicted, const std::vector<int>& truth) {
  require(predicted.size() == truth.size() && !truth.empty(), ErrorKind::ShapeMismatch, "f1: length mismatch");
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());
  double macro = 0, correct = 0;
  for (int c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = predicted[i] == c, t = truth[i] == c;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    macro += tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
  }
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return {macro / static_cast<double>(classes.size()), correct / static_cast<double>(truth.size())};
}

struct MeanStd {
  double mean = 0;
  double std = 0;  // population
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / n)};
}

}  // namespace grami
