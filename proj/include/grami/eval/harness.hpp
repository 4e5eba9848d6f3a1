#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "grami/eval/classify.hpp"
#include "grami/eval/metrics.hpp"
#include "grami/hin/io.hpp"
#include "grami/train/trainer.hpp"

namespace grami {

struct RelationLinkScore {
  std::string relation;
  double auc = 0;
  double ap = 0;
};

struct LinkReport {
  std::vector<RelationLinkScore> relations;

  const RelationLinkScore& at(const std::string& name) const {
    for (const auto& r : relations)
      if (r.relation == name) return r;
    fail(ErrorKind::SchemaMismatch, "no link scores for relation '" + name + "'");
  }
};

inline void to_json(nlohmann::json& j, const LinkReport& r) {
  j = nlohmann::json::array();
  for (const auto& x : r.relations) j.push_back({{"relation", x.relation}, {"auc", x.auc}, {"ap", x.ap}});
}

// Test-pair probabilities for one relation from node latents at their means.
inline std::pair<std::vector<double>, std::vector<int>> link_scores(const Inference& inf, const RelationMatrix& rel,
                                                                    const RelationSplit& rs) {
  const auto& zs = inf.node_mu[static_cast<std::size_t>(rel.src_type)];
  const auto& zd = inf.node_mu[static_cast<std::size_t>(rel.dst_type)];
  std::vector<double> scores;
  std::vector<int> labels;
  auto score = [&](const Pair& p, int label) {
    const double logit = zs.row(p.first).cast<double>().dot(zd.row(p.second).cast<double>());
    scores.push_back(1.0 / (1.0 + std::exp(-logit)));
    labels.push_back(label);
  };
  for (const auto& p : rs.test_pos) score(p, 1);
  for (const auto& p : rs.test_neg) score(p, 0);
  return {scores, labels};
}

// AUC and AP on each relation's held-out test pairs. Inference runs on the
// training graph so test edges stay unseen.
inline LinkReport link_eval(const TrainedModel& m, const HinGraph& g, const EdgeSplit& split) {
  const HinGraph tg = training_graph(g, split);
  auto model = m.instantiate(tg);
  const Inference inf = infer(model, ModelInputs<float>::of(tg));
  LinkReport report;
  for (const auto& rel : g.relations) {
    const auto& name = rel.name;
    if (!m.config.eval_relations.empty() &&
        std::find(m.config.eval_relations.begin(), m.config.eval_relations.end(), name) == m.config.eval_relations.end())
      continue;
    const auto& rs = split.relations[static_cast<std::size_t>(rel.id)];
    require(!rs.test_pos.empty() && !rs.test_neg.empty(), ErrorKind::EmptyTestSet,
            "relation '" + name + "' has no test pairs");
    const auto [scores, labels] = link_scores(inf, rel, rs);
    report.relations.push_back({name, auc_score(scores, labels), average_precision(scores, labels)});
  }
  return report;
}

// Mean of the raw features of a node's attributed neighbors, concatenated
// over attributed neighbor types; zeros where a node has none.
inline MatF neighbor_average(const HinGraph& g, int type) {
  std::vector<MatF> blocks;
  for (const auto& nt : g.types) {
    if (!nt.attributed) continue;
    const MatF& x = *g.features_of(nt.id);
    MatF sum = MatF::Zero(g.type(type).count, x.cols());
    std::vector<double> count(static_cast<std::size_t>(g.type(type).count), 0.0);
    for (const auto& rel : g.relations) {
      const bool as_src = rel.src_type == type && rel.dst_type == nt.id;
      const bool as_dst = rel.dst_type == type && rel.src_type == nt.id && !rel.symmetric();
      if (!as_src && !as_dst) continue;
      for (const auto& [u, v] : rel.adj.pairs()) {
        const index_t self = as_src ? u : v, nb = as_src ? v : u;
        sum.row(self) += x.row(nb);
        count[static_cast<std::size_t>(self)] += 1;
      }
    }
    for (index_t i = 0; i < sum.rows(); ++i)
      if (count[static_cast<std::size_t>(i)] > 0) sum.row(i) /= static_cast<float>(count[static_cast<std::size_t>(i)]);
    blocks.push_back(std::move(sum));
  }
  require(!blocks.empty(), ErrorKind::NoAttributedType, "neighbor average needs an attributed type");
  index_t cols = 0;
  for (const auto& b : blocks) cols += b.cols();
  MatF out(g.type(type).count, cols);
  index_t at = 0;
  for (const auto& b : blocks) {
    out.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return out;
}

struct TypeCompletion {
  std::string type;
  bool attributed = false;
  double rmse = 0;                              // attributed types: ||X' - X||_F / sqrt(n d)
  std::optional<ClassificationReport> completed;  // non-attributed labeled types
  std::optional<ClassificationReport> baseline;
};

struct CompletionSummary {
  std::vector<TypeCompletion> types;
};

inline void to_json(nlohmann::json& j, const CompletionSummary& s) {
  j = nlohmann::json::array();
  for (const auto& t : s.types) {
    nlohmann::json e{{"type", t.type}, {"attributed", t.attributed}};
    if (t.attributed) e["rmse"] = t.rmse;
    if (t.completed) e["completed"] = *t.completed;
    if (t.baseline) e["neighbor_average"] = *t.baseline;
    j.push_back(e);
  }
}

inline std::string completed_file(const std::string& type) { return "completed_" + type + ".csv"; }
inline std::string reconstructed_file(const std::string& type) { return "reconstructed_" + type + ".csv"; }

// Completed hidden features for non-attributed types and raw reconstructions
// for attributed ones, from a deterministic pass over the full graph. Writes
// them under `out_dir` when it is non-empty.
inline CompletionSummary completion_quality(const TrainedModel& m, const HinGraph& g, const ProbeOptions& probe,
                                            const std::filesystem::path& out_dir = {}) {
  auto model = m.instantiate(g);
  const Inference inf = infer(model, ModelInputs<float>::of(g));
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    require(!ec, ErrorKind::IoError, "cannot create " + out_dir.string());
  }
  CompletionSummary summary;
  for (const auto& t : g.types) {
    const auto i = static_cast<std::size_t>(t.id);
    TypeCompletion c{t.name, t.attributed, 0, std::nullopt, std::nullopt};
    if (t.attributed) {
      const MatF& x = *g.features_of(t.id);
      c.rmse = std::sqrt((inf.recon_raw[i] - x).cast<double>().squaredNorm() / static_cast<double>(x.size()));
      if (!out_dir.empty()) write_matrix_csv(inf.recon_raw[i], out_dir / reconstructed_file(t.name));
    } else {
      if (!out_dir.empty()) write_matrix_csv(inf.recon_hidden[i], out_dir / completed_file(t.name));
      if (g.has_labels(t.id)) {
        c.completed = classify(inf.recon_hidden[i], g.labels_of(t.id), probe);
        const bool any_attributed = std::ranges::any_of(g.types, [](const auto& nt) { return nt.attributed; });
        if (any_attributed) c.baseline = classify(neighbor_average(g, t.id), g.labels_of(t.id), probe);
      }
    }
    summary.types.push_back(std::move(c));
  }
  return summary;
}

// ---- plain-text tables ----

inline std::string classification_table(const std::string& title, const ClassificationReport& r) {
  std::string out = title + "\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %-16s %-16s\n", "ratio", "macro-F1", "micro-F1");
  out += line;
  for (const auto& x : r.ratios) {
    std::snprintf(line, sizeof line, "%-8.0f %.4f+-%.4f    %.4f+-%.4f\n", 100 * x.ratio, x.macro_f1.mean, x.macro_f1.std,
                  x.micro_f1.mean, x.micro_f1.std);
    out += line;
  }
  return out;
}

inline std::string link_table(const LinkReport& r) {
  std::size_t width = 8;
  for (const auto& x : r.relations) width = std::max(width, x.relation.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s %-8s %-8s\n", static_cast<int>(width), "relation", "AUC", "AP");
  out += line;
  for (const auto& x : r.relations) {
    std::snprintf(line, sizeof line, "%-*s %.4f   %.4f\n", static_cast<int>(width), x.relation.c_str(), x.auc, x.ap);
    out += line;
  }
  return out;
}

}  // namespace grami
