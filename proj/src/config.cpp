// SPDX-License-Identifier: Apache-2.0
#include "pathsage/config.hpp"

#include <charconv>
#include <fstream>
#include <set>

#include "pathsage/error.hpp"

namespace pathsage {

using json = nlohmann::json;

void TrainConfig::validate() const {
  plan.validate();
  if (batch_size == 0) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "warmup_ratio must lie in [0, 1]");
  }
  if (!(lr >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "lr must be >= 0");
  if (epochs == 0) throw Error(ErrorCode::kInvalidConfig, "epochs must be >= 1");
  if (!(clip_norm >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "clip_norm must be >= 0");
  if (workers == 0) throw Error(ErrorCode::kInvalidConfig, "workers must be >= 1");
}

ModelShape TrainConfig::model_shape(const Dataset& data) const {
  ModelShape shape;
  shape.feature_dim = data.graph.feature_dim();
  shape.hidden = hidden;
  shape.heads = heads;
  shape.layers = layers;
  shape.num_classes = data.labels.num_classes;
  shape.plan = plan;
  shape.dropout_encoder = dropout_encoder;
  shape.dropout_output = dropout_output;
  shape.task = data.labels.task;
  shape.validate();
  return shape;
}

json to_json(const TrainConfig& cfg) {
  return json{{"counts", cfg.plan.counts},
              {"hidden", cfg.hidden},
              {"heads", cfg.heads},
              {"layers", cfg.layers},
              {"batch_size", cfg.batch_size},
              {"lr", cfg.lr},
              {"warmup_ratio", cfg.warmup_ratio},
              {"dropout_encoder", cfg.dropout_encoder},
              {"dropout_output", cfg.dropout_output},
              {"epochs", cfg.epochs},
              {"seed", cfg.seed},
              {"patience", cfg.patience},
              {"clip_norm", cfg.clip_norm},
              {"workers", cfg.workers}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  try {
    cfg.plan.counts = j.at("counts").get<std::vector<std::uint32_t>>();
    cfg.hidden = j.at("hidden").get<std::size_t>();
    cfg.heads = j.at("heads").get<std::size_t>();
    cfg.layers = j.at("layers").get<std::size_t>();
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.lr = j.at("lr").get<double>();
    cfg.warmup_ratio = j.at("warmup_ratio").get<double>();
    cfg.dropout_encoder = j.at("dropout_encoder").get<double>();
    cfg.dropout_output = j.at("dropout_output").get<double>();
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.patience = j.at("patience").get<std::size_t>();
    cfg.clip_norm = j.at("clip_norm").get<double>();
    cfg.workers = j.at("workers").get<unsigned>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("train config: ") + e.what());
  }
  return cfg;
}

json to_json(const ModelShape& shape) {
  return json{{"feature_dim", shape.feature_dim},
              {"hidden", shape.hidden},
              {"heads", shape.heads},
              {"layers", shape.layers},
              {"num_classes", shape.num_classes},
              {"counts", shape.plan.counts},
              {"dropout_encoder", shape.dropout_encoder},
              {"dropout_output", shape.dropout_output},
              {"task", std::string(to_string(shape.task))}};
}

ModelShape model_shape_from_json(const json& j) {
  ModelShape shape;
  try {
    shape.feature_dim = j.at("feature_dim").get<std::size_t>();
    shape.hidden = j.at("hidden").get<std::size_t>();
    shape.heads = j.at("heads").get<std::size_t>();
    shape.layers = j.at("layers").get<std::size_t>();
    shape.num_classes = j.at("num_classes").get<std::size_t>();
    shape.plan.counts = j.at("counts").get<std::vector<std::uint32_t>>();
    shape.dropout_encoder = j.at("dropout_encoder").get<double>();
    shape.dropout_output = j.at("dropout_output").get<double>();
    shape.task = parse_task(j.at("task").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("model shape: ") + e.what());
  }
  return shape;
}

std::vector<std::uint32_t> parse_counts(const std::string& text) {
  std::vector<std::uint32_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    std::uint32_t value = 0;
    const char* first = text.data() + start;
    const char* last = text.data() + comma;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
      throw Error(ErrorCode::kInvalidConfig, "bad --counts list '" + text + "'");
    }
    out.push_back(value);
    start = comma + 1;
  }
  return out;
}

ConfigLayer config_layer_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "config must be a JSON object");
  static const std::set<std::string> known = {
      "dataset", "out",        "checkpoint", "seed",         "workers",         "epochs",
      "depth",   "counts",     "hidden",     "heads",        "layers",          "batch_size",
      "lr",      "warmup_ratio", "dropout_encoder", "dropout_output", "clip_norm", "patience",
      "runs",    "log_interval", "node",     "split"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
  }
  ConfigLayer layer;
  try {
    auto take = [&j](const char* key, auto& slot) {
      if (j.contains(key)) slot = j.at(key).get<typename std::decay_t<decltype(slot)>::value_type>();
    };
    take("dataset", layer.dataset);
    take("out", layer.out);
    take("checkpoint", layer.checkpoint);
    take("seed", layer.seed);
    take("workers", layer.workers);
    take("epochs", layer.epochs);
    take("depth", layer.depth);
    take("counts", layer.counts);
    take("hidden", layer.hidden);
    take("heads", layer.heads);
    take("layers", layer.layers);
    take("batch_size", layer.batch_size);
    take("lr", layer.lr);
    take("warmup_ratio", layer.warmup_ratio);
    take("dropout_encoder", layer.dropout_encoder);
    take("dropout_output", layer.dropout_output);
    take("clip_norm", layer.clip_norm);
    take("patience", layer.patience);
    take("runs", layer.runs);
    take("log_interval", layer.log_interval);
    take("node", layer.node);
    take("split", layer.split);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config value: ") + e.what());
  }
  return layer;
}

ConfigLayer read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
  return config_layer_from_json(j);
}

namespace {

std::vector<std::uint32_t> resized(std::vector<std::uint32_t> counts, std::size_t depth) {
  if (depth == 0) throw Error(ErrorCode::kInvalidPlan, "depth must be >= 1");
  const std::uint32_t pad = counts.empty() ? 1 : counts.back();
  counts.resize(depth, pad);
  return counts;
}

}  // namespace

RunConfig resolve_config(const ConfigLayer& file, const ConfigLayer& flags) {
  RunConfig cfg;
  TrainConfig& t = cfg.train;
  for (const ConfigLayer* layer : {&file, &flags}) {
    const ConfigLayer& l = *layer;
    if (l.dataset) cfg.dataset = *l.dataset;
    if (l.out) cfg.out = *l.out;
    if (l.checkpoint) cfg.checkpoint = *l.checkpoint;
    if (l.runs) cfg.runs = *l.runs;
    if (l.log_interval) cfg.log_interval = *l.log_interval;
    if (l.node) cfg.node = *l.node;
    if (l.split) cfg.split = parse_split(*l.split);
    if (l.seed) t.seed = *l.seed;
    if (l.workers) t.workers = *l.workers;
    if (l.epochs) t.epochs = *l.epochs;
    if (l.hidden) t.hidden = *l.hidden;
    if (l.heads) t.heads = *l.heads;
    if (l.layers) t.layers = *l.layers;
    if (l.batch_size) t.batch_size = *l.batch_size;
    if (l.lr) t.lr = *l.lr;
    if (l.warmup_ratio) t.warmup_ratio = *l.warmup_ratio;
    if (l.dropout_encoder) t.dropout_encoder = *l.dropout_encoder;
    if (l.dropout_output) t.dropout_output = *l.dropout_output;
    if (l.clip_norm) t.clip_norm = *l.clip_norm;
    if (l.patience) t.patience = *l.patience;

    if (l.counts && l.depth && l.counts->size() != *l.depth) {
      throw Error(ErrorCode::kInvalidConfig, "depth " + std::to_string(*l.depth) + " but " +
                                                 std::to_string(l.counts->size()) + " counts");
    }
    if (l.counts) {
      t.plan.counts = *l.counts;
    } else if (l.depth) {
      t.plan.counts = resized(t.plan.counts, *l.depth);
    }
  }
  t.validate();
  if (cfg.runs == 0) throw Error(ErrorCode::kInvalidConfig, "runs must be >= 1");
  return cfg;
}

}  // namespace pathsage
