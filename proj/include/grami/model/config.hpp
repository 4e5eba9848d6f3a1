#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "grami/error.hpp"
#include "grami/hin/split.hpp"

namespace grami {

struct TrainConfig {
  index_t hidden_dim = 64;   // shared projection width
  index_t latent_dim = 64;   // k: latent and hidden-layer width
  int heads = 1;
  int encoder_layers = 2;
  int decoder_layers = 1;    // decoder HGNN depth L
  index_t noise_node = 16;   // width of the noise appended to the node encoder input
  index_t noise_attr = 16;   // width of the noise appended to the attribute encoder input
  double lr = 0.01;
  double dropout = 0.0;
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  bool edge_loss = true;     // false drops the edge-level terms (ablation)
  std::string kl_norm = "rows_squared";  // "rows" or "rows_squared"
  int epochs = 2000;
  int patience = 100;
  std::uint64_t seed = 0;
  int noise_samples = 1;
  SplitRatios split;
  std::string val_metric = "bce";  // "bce" or "auc"
  std::vector<std::string> eval_relations;  // empty: every relation

  void validate() const {
    auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::Config, what); };
    check(hidden_dim >= 1, "hidden_dim must be >= 1");
    check(latent_dim >= 1, "latent_dim must be >= 1");
    check(heads == 1 || heads == 2 || heads == 4 || heads == 8, "heads must be one of {1, 2, 4, 8}");
    check(encoder_layers == 2, "encoder_layers is fixed at 2");
    check(decoder_layers >= 0 && decoder_layers <= 2, "decoder_layers must be in {0, 1, 2}");
    check(noise_node >= 0 && noise_attr >= 0, "noise widths must be >= 0");
    check(lr > 0, "lr must be positive");
    check(dropout >= 0 && dropout < 1, "dropout must be in [0, 1)");
    check(lambda1 >= 0 && lambda1 <= 1 && lambda2 >= 0 && lambda2 <= 1, "lambda1 and lambda2 must be in [0, 1]");
    check(epochs >= 0, "epochs must be >= 0");
    check(patience >= 1, "patience must be >= 1");
    check(noise_samples >= 1, "noise_samples must be >= 1");
    check(kl_norm == "rows" || kl_norm == "rows_squared", "kl_norm must be 'rows' or 'rows_squared'");
    check(val_metric == "bce" || val_metric == "auc", "val_metric must be 'bce' or 'auc'");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"hidden_dim", c.hidden_dim},
                     {"latent_dim", c.latent_dim},
                     {"heads", c.heads},
                     {"encoder_layers", c.encoder_layers},
                     {"decoder_layers", c.decoder_layers},
                     {"noise_node", c.noise_node},
                     {"noise_attr", c.noise_attr},
                     {"lr", c.lr},
                     {"dropout", c.dropout},
                     {"lambda1", c.lambda1},
                     {"lambda2", c.lambda2},
                     {"edge_loss", c.edge_loss},
                     {"kl_norm", c.kl_norm},
                     {"epochs", c.epochs},
                     {"patience", c.patience},
                     {"seed", c.seed},
                     {"noise_samples", c.noise_samples},
                     {"split", {c.split.train, c.split.val, c.split.test}},
                     {"val_metric", c.val_metric},
                     {"eval_relations", c.eval_relations}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  require(j.is_object(), ErrorKind::Config, "config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "hidden_dim") c.hidden_dim = value.get<index_t>();
      else if (key == "latent_dim") c.latent_dim = value.get<index_t>();
      else if (key == "heads") c.heads = value.get<int>();
      else if (key == "encoder_layers") c.encoder_layers = value.get<int>();
      else if (key == "decoder_layers") c.decoder_layers = value.get<int>();
      else if (key == "noise_node") c.noise_node = value.get<index_t>();
      else if (key == "noise_attr") c.noise_attr = value.get<index_t>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "lambda1") c.lambda1 = value.get<double>();
      else if (key == "lambda2") c.lambda2 = value.get<double>();
      else if (key == "edge_loss") c.edge_loss = value.get<bool>();
      else if (key == "kl_norm") c.kl_norm = value.get<std::string>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "patience") c.patience = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "noise_samples") c.noise_samples = value.get<int>();
      else if (key == "split") {
        const auto r = value.get<std::vector<double>>();
        require(r.size() == 3, ErrorKind::Config, "split must list three ratios");
        c.split = {r[0], r[1], r[2]};
      } else if (key == "val_metric") c.val_metric = value.get<std::string>();
      else if (key == "eval_relations") c.eval_relations = value.get<std::vector<std::string>>();
      else fail(ErrorKind::Config, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, e.what());
  }
}

}  // namespace grami
