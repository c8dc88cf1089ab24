// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathsage/graph.hpp"
#include "pathsage/model.hpp"
#include "pathsage/sampler.hpp"

namespace pathsage {

// Training hyperparameters. Defaults: Adam at 1e-3 with 10% linear warmup,
// two encoder layers of 8 heads, hidden width 128, batch 32, dropout 0.1 in
// the encoder and 0.3 on the output layer, path depth 8 with
// [5, 5, 5, 5, 5, 10, 10, 10] paths per length.
struct TrainConfig {
  SamplePlan plan = SamplePlan::defaults();
  std::size_t hidden = 128;
  std::size_t heads = 8;
  std::size_t layers = 2;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double warmup_ratio = 0.1;
  double dropout_encoder = 0.1;
  double dropout_output = 0.3;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  std::size_t patience = 10;  // epochs without val improvement; 0 disables
  double clip_norm = 5.0;     // global gradient norm; 0 disables
  unsigned workers = 1;

  void validate() const;
  ModelShape model_shape(const Dataset& data) const;

  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelShape& shape);
ModelShape model_shape_from_json(const nlohmann::json& j);

// Everything the command line tool needs.
struct RunConfig {
  TrainConfig train;
  std::string dataset;
  std::string out = ".";
  std::string checkpoint;
  std::size_t runs = 5;
  std::size_t log_interval = 1;
  NodeId node = 0;
  Split split = Split::kTest;
};

// Optional values from one configuration layer (file or flags).
struct ConfigLayer {
  std::optional<std::string> dataset, out, checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::size_t> epochs, depth, hidden, heads, layers, batch_size, runs, log_interval,
      patience;
  std::optional<std::vector<std::uint32_t>> counts;
  std::optional<double> lr, warmup_ratio, dropout_encoder, dropout_output, clip_norm;
  std::optional<NodeId> node;
  std::optional<std::string> split;
};

// Parses a config file object; unknown keys raise InvalidConfig.
ConfigLayer config_layer_from_json(const nlohmann::json& j);
ConfigLayer read_config_file(const std::string& path);

// defaults < file < flags. When depth and counts disagree, the layer with
// higher precedence wins and the other is resized (counts are truncated or
// padded with their last entry); a conflict inside one layer is an error.
RunConfig resolve_config(const ConfigLayer& file, const ConfigLayer& flags);

std::vector<std::uint32_t> parse_counts(const std::string& text);

}  // namespace pathsage
