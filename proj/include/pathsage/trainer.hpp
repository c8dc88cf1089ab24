// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "pathsage/checkpoint.hpp"
#include "pathsage/config.hpp"
#include "pathsage/graph.hpp"
#include "pathsage/model.hpp"
#include "pathsage/optim.hpp"

namespace pathsage {

struct EpochMetrics {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_f1 = 0.0;  // from the training-mode forward passes of the epoch
  double val_f1 = -1.0;   // -1 when not evaluated
  double last_lr = 0.0;
  std::size_t steps = 0;
};

struct FitResult {
  std::vector<EpochMetrics> epochs;
  bool stopped_early = false;
};

class Trainer {
 public:
  // Fresh model initialised from cfg.seed.
  Trainer(const Dataset& data, const TrainConfig& cfg, std::string dataset_name = {});
  // Continues the run stored in `ckpt`.
  Trainer(const Dataset& data, Checkpoint ckpt);

  std::size_t steps_per_epoch() const;
  std::size_t total_steps() const;

  // One pass over the shuffled training nodes. Paths, batch order and
  // dropout masks derive from (seed, epoch), so an epoch can be replayed.
  EpochMetrics train_epoch();

  using EpochCallback = std::function<void(const EpochMetrics&)>;

  // Trains until cfg.epochs or until val micro-F1 has not improved for
  // cfg.patience epochs (skipped when the val split is empty).
  FitResult fit(const EpochCallback& on_epoch = {});

  // JSON lines per epoch, and per step when `steps` is set.
  void set_log(std::ostream* log, bool steps = false) {
    log_ = log;
    log_steps_ = steps;
  }

  Checkpoint checkpoint() const;

  const PathSageModel<float>& model() const { return model_; }
  const AdamState<float>& optimizer() const { return optimizer_; }
  const TrainingProgress& progress() const { return progress_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  const Dataset& data_;
  TrainConfig cfg_;
  std::string dataset_name_;
  PathSageModel<float> model_;
  AdamState<float> optimizer_;
  TrainingProgress progress_;
  std::ostream* log_ = nullptr;
  bool log_steps_ = false;
};

}  // namespace pathsage
