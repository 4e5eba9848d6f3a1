#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "grami/eval/metrics.hpp"
#include "grami/hin/split.hpp"
#include "grami/model/model.hpp"
#include "grami/numeric/adam.hpp"
#include "grami/numeric/checkpoint.hpp"

namespace grami {

struct EpochRecord {
  int epoch = 0;
  LossReport train;
  double val_loss = 0;
  double hidden_norm = 0;  // RMS of the projected features; a collapse shows up here
  double seconds = 0;      // wall time, not serialized
};

inline nlohmann::json epoch_json(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["loss"] = r.train;
  j["val_loss"] = r.val_loss;
  j["hidden_norm"] = r.hidden_norm;
  return j;
}

struct TrainedModel {
  ParamStore<float> params;
  TrainConfig config;
  std::vector<EpochRecord> history;
  int best_epoch = -1;  // -1 when no epoch ran

  // Model bound to g's schema with these parameters; ShapeMismatch names the
  // first tensor that does not fit.
  GramiModel<float> instantiate(const HinGraph& g) const {
    GramiModel<float> model(ModelSchema::of(g), config);
    model.load_params(params);
    return model;
  }
};

// Deterministic pass: no injected noise, latents at their means.
struct Inference {
  std::vector<MatF> hidden;        // per type
  std::vector<MatF> node_mu;       // per type
  std::vector<MatF> recon_hidden;  // per type
  std::vector<MatF> recon_raw;     // per type; empty for non-attributed
};

inline Inference infer(GramiModel<float>& model, const ModelInputs<float>& in) {
  Tape<float> tape;
  const auto noise = NoiseDraws<float>::zeros(model.schema(), model.config());
  const auto fw = model.forward(tape, in, noise);
  Inference out;
  for (std::size_t t = 0; t < fw.hidden.size(); ++t) {
    out.hidden.push_back(fw.hidden[t].value());
    out.node_mu.push_back(fw.node[t].mu.value());
    out.recon_hidden.push_back(fw.recon_hidden[t].value());
    out.recon_raw.push_back(fw.recon_raw[t].valid() ? fw.recon_raw[t].value() : MatF());
  }
  return out;
}

namespace detail {

inline double validation_loss(GramiModel<float>& model, const ModelInputs<float>& in, const EdgeBatch& val,
                              const std::string& metric) {
  Tape<float> tape;
  const auto noise = NoiseDraws<float>::zeros(model.schema(), model.config());
  const auto fw = model.forward(tape, in, noise, false);
  if (metric == "auc") {
    double auc_sum = 0;
    const auto& rels = model.schema().relations;
    for (std::size_t r = 0; r < rels.size(); ++r) {
      const auto& zs = fw.node[static_cast<std::size_t>(rels[r].src_type)].mu.value();
      const auto& zd = fw.node[static_cast<std::size_t>(rels[r].dst_type)].mu.value();
      std::vector<double> scores;
      std::vector<int> labels;
      for (const auto& [u, v] : val.positives[r]) scores.push_back(zs.row(u).dot(zd.row(v))), labels.push_back(1);
      for (const auto& [u, v] : val.negatives[r]) scores.push_back(zs.row(u).dot(zd.row(v))), labels.push_back(0);
      auc_sum += auc_score(scores, labels);
    }
    return 1.0 - auc_sum / static_cast<double>(rels.size());
  }
  double total = 0;
  for (const auto& v : model.relation_losses(fw, val)) total += v.item();
  return total;
}

inline void check_finite(const LossReport& r, int epoch) {
  const std::pair<const char*, double> parts[] = {{"edge_bce", r.edge_bce}, {"edge_kl", r.edge_kl},
                                                  {"attr_recon", r.attr_recon}, {"attr_kl", r.attr_kl},
                                                  {"rmse", r.rmse}, {"total", r.total}};
  for (const auto& [name, v] : parts)
    require(std::isfinite(v), ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": component " + name);
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochRecord&)>;

// Full-graph training on the split's training edges with Adam, negatives and
// noise resampled every epoch, early stopping on validation loss. Returns the
// parameters of the best validation epoch.
inline TrainedModel train(const HinGraph& g, const EdgeSplit& split, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const HinGraph tg = training_graph(g, split);
  const auto inputs = ModelInputs<float>::of(tg);
  GramiModel<float> model(inputs.schema, cfg);
  const RngStream root(cfg.seed);
  {
    RngStream init = root.fork(1);
    model.initialize(init);
  }

  TrainedModel result;
  result.config = cfg;
  result.params = model.params();
  if (cfg.epochs == 0) return result;

  std::vector<NegativeSampler> samplers;
  EdgeBatch batch, val;
  for (const auto& rel : tg.relations) {
    const auto& rs = split.relations[static_cast<std::size_t>(rel.id)];
    samplers.emplace_back(rel, rs.train_pos);
    batch.positives.push_back(rs.train_pos);
    val.positives.push_back(rs.val_pos);
    val.negatives.push_back(rs.val_neg);
  }
  batch.negatives.resize(batch.positives.size());

  Adam<float> adam(AdamOptions{cfg.lr});
  const auto names = model.relation_names();
  const LossWeights weights = model.weights();
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    RngStream rng = root.fork(1000 + static_cast<std::uint64_t>(epoch));
    for (std::size_t r = 0; r < samplers.size(); ++r)
      batch.negatives[r] = samplers[r].sample(batch.positives[r].size(), rng, names[r]);

    model.params().zero_grad();
    EpochRecord rec;
    rec.epoch = epoch;
    const double share = 1.0 / cfg.noise_samples;
    for (int s = 0; s < cfg.noise_samples; ++s) {
      const auto noise = NoiseDraws<float>::draw(model.schema(), cfg, rng, true);
      Tape<float> tape;
      const auto fw = model.forward(tape, inputs, noise);
      const auto terms = model.loss(tape, fw, inputs, batch);
      const LossReport rep = terms.report(names, weights);
      detail::check_finite(rep, epoch);
      tape.backward(cfg.noise_samples == 1 ? terms.total : scale(terms.total, static_cast<float>(share)));
      rec.train.edge_bce += share * rep.edge_bce;
      rec.train.edge_kl += share * rep.edge_kl;
      rec.train.attr_recon += share * rep.attr_recon;
      rec.train.attr_kl += share * rep.attr_kl;
      rec.train.rmse += share * rep.rmse;
      rec.train.total += share * rep.total;
      if (s == 0)
        rec.train.per_relation = rep.per_relation;
      else
        for (std::size_t r = 0; r < rep.per_relation.size(); ++r) rec.train.per_relation[r].second += rep.per_relation[r].second;
      if (s == 0) {
        double sq = 0, n = 0;
        for (const auto& h : fw.hidden) sq += h.value().squaredNorm(), n += static_cast<double>(h.value().size());
        rec.hidden_norm = std::sqrt(sq / n);
      }
    }
    if (cfg.noise_samples > 1)
      for (auto& [name, v] : rec.train.per_relation) v *= share;
    adam.step(model.params());

    rec.val_loss = detail::validation_loss(model, inputs, val, cfg.val_metric);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.best_epoch = epoch;
      result.params = model.params();
    } else if (epoch - result.best_epoch >= cfg.patience) {
      break;
    }
  }
  return result;
}

// ---- checkpoints ----

inline std::string encode_checkpoint(const TrainedModel& m) {
  nlohmann::json trailer;
  trailer["config"] = m.config;
  trailer["best_epoch"] = m.best_epoch;
  return encode_tensors(m.params, trailer.dump());
}

inline TrainedModel decode_checkpoint(const std::string& bytes, const std::string& source = "checkpoint") {
  TensorBundle bundle = decode_tensors(bytes, source);
  TrainedModel m;
  m.params = std::move(bundle.tensors);
  try {
    const auto trailer = nlohmann::json::parse(bundle.json);
    m.config = trailer.at("config").get<TrainConfig>();
    m.best_epoch = trailer.at("best_epoch").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptCheckpoint, source + ": bad JSON trailer: " + e.what());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Config) throw;
    fail(ErrorKind::CorruptCheckpoint, source + ": bad config in trailer: " + e.what());
  }
  return m;
}

inline void save_checkpoint(const TrainedModel& m, const std::string& path) { write_file(path, encode_checkpoint(m)); }

inline TrainedModel load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path), path); }

}  // namespace grami
