// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pathsage/config.hpp"
#include "pathsage/model.hpp"
#include "pathsage/optim.hpp"

namespace pathsage {

// Where a training run stands between epochs.
struct TrainingProgress {
  std::size_t epochs_completed = 0;
  std::size_t total_steps = 0;
  double best_val_f1 = -1.0;
  std::size_t epochs_since_best = 0;
  bool stopped_early = false;
  std::vector<double> epoch_losses;

  bool operator==(const TrainingProgress&) const = default;
};

struct Checkpoint {
  TrainConfig config;
  std::string dataset;
  PathSageModel<float> model;
  AdamState<float> optimizer;
  TrainingProgress progress;
};

// Layout (little-endian):
//   "PSCK" | u32 version | u64 json length | config JSON |
//   u32 block count | blocks: u32 name length, name, u32 rank, u64 dims...,
//   f32 values | u64 CRC-64/XZ of every preceding byte.
// Adam moments are stored as "<param>.adam_m" / "<param>.adam_v".
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t crc64(std::span<const std::uint8_t> bytes);

// CRC stored in the trailer of a checkpoint file.
std::uint64_t checkpoint_crc(const std::filesystem::path& path);

}  // namespace pathsage
