#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "grami/eval/harness.hpp"
#include "grami/eval/synthetic.hpp"
#include "grami/hin/corrupt.hpp"
#include "grami/hin/io.hpp"
#include "grami/train/toy.hpp"
#include "grami/train/trainer.hpp"

namespace grami {

inline constexpr const char* kVersion = "0.1.0";

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
      return 1;
    case ErrorKind::NonFiniteLoss:
      return 3;
    default:
      return 2;
  }
}

namespace cli {

namespace fs = std::filesystem;

struct Options {
  std::string data;
  std::string out;
  std::string config;
  std::string checkpoint;
  std::string task;
  std::string type;
  std::optional<std::uint64_t> seed;
  double sigma_mult = 1.0;
  int threads = 1;
};

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(std::string command, const Options& o) : started_(utc_now()) {
    j_["command"] = std::move(command);
    j_["dataset"] = o.data;
    j_["threads"] = o.threads;
    j_["code_version"] = kVersion;
    j_["started_at"] = started_;
  }
  void set(const std::string& key, nlohmann::json value) { j_[key] = std::move(value); }
  void write(const fs::path& dir) {
    j_["finished_at"] = utc_now();
    write_file((dir / "manifest.json").string(), j_.dump(2) + "\n");
  }

 private:
  nlohmann::json j_;
  std::string started_;
};

inline void require_flag(const std::string& value, const std::string& flag) {
  require(!value.empty(), ErrorKind::Config, flag + " is required");
}

inline fs::path prepare_out(const Options& o) {
  require_flag(o.out, "--out");
  std::error_code ec;
  fs::create_directories(o.out, ec);
  require(!ec, ErrorKind::IoError, "cannot create " + o.out);
  return o.out;
}

inline HinGraph load(const Options& o) {
  require_flag(o.data, "--data");
  HinGraph g = load_dataset(o.data);
  if (const index_t n = isolated_node_count(g); n > 0)
    std::cerr << "warning: " << n << " isolated node(s); they receive zero messages\n";
  return g;
}

inline TrainConfig load_config(const Options& o) {
  TrainConfig cfg;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    require(static_cast<bool>(in), ErrorKind::Config, "cannot read config " + o.config);
    try {
      cfg = nlohmann::json::parse(in).get<TrainConfig>();
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::Config, o.config + ": " + e.what());
    }
  }
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

inline void write_json(const fs::path& file, const nlohmann::json& j) { write_file(file.string(), j.dump(2) + "\n"); }

inline int cmd_train(const Options& o) {
  const HinGraph g = load(o);
  const TrainConfig cfg = load_config(o);
  const fs::path out = prepare_out(o);
  Manifest manifest("train", o);
  manifest.set("config", cfg);
  manifest.set("seed", cfg.seed);

  const EdgeSplit split = split_edges(g, cfg.split, cfg.seed);
  std::string log;
  const TrainedModel m = train(g, split, cfg, [&log](const EpochRecord& r) { log += epoch_json(r).dump() + "\n"; });
  write_file((out / "train_log.jsonl").string(), log);
  save_checkpoint(m, (out / "checkpoint.bin").string());
  manifest.set("best_epoch", m.best_epoch);
  manifest.set("epochs_run", m.history.size());
  manifest.write(out);
  std::cout << "trained " << m.history.size() << " epoch(s), best epoch " << m.best_epoch << "\n";
  return 0;
}

inline ProbeOptions probe_options(const Options& o, const TrainConfig& cfg) {
  ProbeOptions p;
  p.seed = o.seed.value_or(cfg.seed);
  p.threads = o.threads;
  return p;
}

// Node latent means for every type, from a deterministic pass over the full graph.
inline Inference full_graph_inference(const TrainedModel& m, const HinGraph& g) {
  auto model = m.instantiate(g);
  return infer(model, ModelInputs<float>::of(g));
}

inline int cmd_eval(const Options& o) {
  require(o.task == "nc" || o.task == "lp", ErrorKind::Config, "--task must be nc or lp");
  require_flag(o.checkpoint, "--checkpoint");
  const HinGraph g = load(o);
  const TrainedModel m = load_checkpoint(o.checkpoint);
  const fs::path out = prepare_out(o);
  Manifest manifest("eval", o);
  manifest.set("task", o.task);
  manifest.set("checkpoint", o.checkpoint);
  manifest.set("config", m.config);

  if (o.task == "lp") {
    const EdgeSplit split = split_edges(g, m.config.split, m.config.seed);
    const LinkReport r = link_eval(m, g, split);
    write_json(out / "lp_report.json", r);
    write_file((out / "lp_report.txt").string(), link_table(r));
    std::cout << link_table(r);
  } else {
    std::vector<int> types;
    if (!o.type.empty()) {
      types.push_back(g.type_id(o.type));
      require(g.has_labels(types[0]), ErrorKind::MissingFile, "no labels_" + o.type + ".txt in " + o.data);
    } else {
      for (const auto& t : g.types)
        if (g.has_labels(t.id)) types.push_back(t.id);
      require(!types.empty(), ErrorKind::MissingFile, "node classification needs a labels_<type>.txt file");
    }
    const Inference inf = full_graph_inference(m, g);
    const ProbeOptions probe = probe_options(o, m.config);
    manifest.set("seed", probe.seed);
    nlohmann::json report;
    std::string text;
    for (int t : types) {
      const auto r = classify(inf.node_mu[static_cast<std::size_t>(t)], g.labels_of(t), probe);
      report[g.type(t).name] = r;
      text += classification_table(g.type(t).name, r);
    }
    write_json(out / "nc_report.json", report);
    write_file((out / "nc_report.txt").string(), text);
    std::cout << text;
  }
  manifest.write(out);
  return 0;
}

inline int cmd_complete(const Options& o) {
  require_flag(o.checkpoint, "--checkpoint");
  const HinGraph g = load(o);
  const TrainedModel m = load_checkpoint(o.checkpoint);
  const fs::path out = prepare_out(o);
  Manifest manifest("complete", o);
  manifest.set("checkpoint", o.checkpoint);
  const ProbeOptions probe = probe_options(o, m.config);
  manifest.set("seed", probe.seed);
  const CompletionSummary s = completion_quality(m, g, probe, out);
  write_json(out / "completion_summary.json", s);
  for (const auto& t : s.types) {
    if (t.attributed) std::cout << t.type << ": RMSE " << t.rmse << "\n";
    if (t.completed) std::cout << classification_table(t.type + " (completed)", *t.completed);
    if (t.baseline) std::cout << classification_table(t.type + " (neighbor average)", *t.baseline);
  }
  manifest.write(out);
  return 0;
}

inline int cmd_corrupt(const Options& o) {
  const HinGraph g = load(o);
  const fs::path out = prepare_out(o);
  const std::uint64_t seed = o.seed.value_or(0);
  Manifest manifest("corrupt", o);
  manifest.set("sigma_mult", o.sigma_mult);
  manifest.set("seed", seed);
  write_dataset(corrupt_features(g, o.sigma_mult, seed), out);
  manifest.write(out);
  return 0;
}

inline int cmd_export(const Options& o) {
  const HinGraph g = load(o);
  const fs::path out = prepare_out(o);
  Manifest manifest("export", o);
  write_dataset(g, out);
  manifest.write(out);
  return 0;
}

inline int cmd_synth(const Options& o) {
  const fs::path out = prepare_out(o);
  SyntheticSpec spec;
  spec.seed = o.seed.value_or(0);
  Manifest manifest("synth", o);
  manifest.set("seed", spec.seed);
  write_dataset(make_synthetic_hin(spec).graph, out);
  manifest.write(out);
  return 0;
}

inline int cmd_gradcheck(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const GradCheckResult r = toy_grad_check(o.seed.value_or(7));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "coordinates: " << r.coordinates << "\n"
            << "max relative error: " << r.max_rel_error << " at " << r.worst_name << " (analytic " << r.analytic
            << ", numeric " << r.numeric << ")\n"
            << "seconds: " << seconds << "\n";
  return r.max_rel_error < 1e-4 ? 0 : 3;
}

}  // namespace cli

inline int run_cli(int argc, char** argv) {
  CLI::App app{"GraMI: variational autoencoding of attributed heterogeneous graphs"};
  app.require_subcommand(1);
  cli::Options o;

  auto common = [&](CLI::App* sub, bool data, bool out) {
    if (data) sub->add_option("--data", o.data, "dataset directory");
    if (out) sub->add_option("--out", o.out, "output directory");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; }, "random seed");
    sub->add_option("--threads", o.threads, "worker threads for evaluation")->check(CLI::PositiveNumber);
  };
  auto* train = app.add_subcommand("train", "split edges, train, write checkpoint + log");
  common(train, true, true);
  train->add_option("--config", o.config, "JSON file with TrainConfig fields");
  auto* eval = app.add_subcommand("eval", "node classification (nc) or link prediction (lp) report");
  common(eval, true, true);
  eval->add_option("--task", o.task, "nc or lp")->required();
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint written by train");
  eval->add_option("--type", o.type, "labeled node type for nc (default: every labeled type)");
  auto* complete = app.add_subcommand("complete", "export completed and reconstructed features");
  common(complete, true, true);
  complete->add_option("--checkpoint", o.checkpoint, "checkpoint written by train");
  auto* corrupt = app.add_subcommand("corrupt", "add Gaussian noise to raw features");
  common(corrupt, true, true);
  corrupt->add_option("--sigma-mult", o.sigma_mult, "noise std as a multiple of the feature std");
  auto* exp = app.add_subcommand("export", "rewrite a dataset in canonical form");
  common(exp, true, true);
  auto* synth = app.add_subcommand("synth", "write the default synthetic HIN");
  common(synth, false, true);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full loss on a toy graph");
  common(gradcheck, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cli::cmd_train(o);
    if (*eval) return cli::cmd_eval(o);
    if (*complete) return cli::cmd_complete(o);
    if (*corrupt) return cli::cmd_corrupt(o);
    if (*exp) return cli::cmd_export(o);
    if (*synth) return cli::cmd_synth(o);
    if (*gradcheck) return cli::cmd_gradcheck(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::Config) std::cerr << app.help();
    return exit_code(e.kind());
  }
  return 1;
}

}  // namespace grami
