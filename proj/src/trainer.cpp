// SPDX-License-Identifier: Apache-2.0
#include "pathsage/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pathsage/error.hpp"
#include "pathsage/metrics.hpp"
#include "pathsage/random.hpp"
#include "pathsage/sampler.hpp"

namespace pathsage {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5'4F'FF'1Eull;
constexpr std::uint64_t kDropoutStream = 0xD2'0F'00'7Dull;

bool all_finite(std::span<const NamedTensor<float>> params, std::string* bad) {
  for (const auto& p : params) {
    for (float x : p.tensor.data()) {
      if (!std::isfinite(x)) {
        *bad = p.name;
        return false;
      }
    }
  }
  return true;
}

}  // namespace

Trainer::Trainer(const Dataset& data, const TrainConfig& cfg, std::string dataset_name)
    : data_(data), cfg_(cfg), dataset_name_(std::move(dataset_name)) {
  cfg_.validate();
  if (data_.splits.train.empty()) throw Error(ErrorCode::kEmptySplit, "train split is empty");
  model_ = PathSageModel<float>::init(cfg_.model_shape(data_), cfg_.seed);
  optimizer_ = AdamState<float>::for_parameters(model_.parameters());
  progress_.total_steps = total_steps();
}

Trainer::Trainer(const Dataset& data, Checkpoint ckpt)
    : data_(data),
      cfg_(ckpt.config),
      dataset_name_(std::move(ckpt.dataset)),
      model_(std::move(ckpt.model)),
      optimizer_(std::move(ckpt.optimizer)),
      progress_(std::move(ckpt.progress)) {
  cfg_.validate();
  const ModelShape expected = cfg_.model_shape(data_);
  const ModelShape& actual = model_.shape();
  if (expected.feature_dim != actual.feature_dim || expected.num_classes != actual.num_classes ||
      expected.task != actual.task) {
    throw Error(ErrorCode::kDimensionMismatch, "checkpoint model does not fit this dataset");
  }
  if (optimizer_.step != progress_.epochs_completed * steps_per_epoch()) {
    throw Error(ErrorCode::kInvalidConfig, "checkpoint step count does not match this training split");
  }
  // A changed epoch budget stretches the remaining schedule.
  progress_.total_steps = total_steps();
}

std::size_t Trainer::steps_per_epoch() const {
  const std::size_t n = data_.splits.train.size();
  return (n + cfg_.batch_size - 1) / cfg_.batch_size;
}

std::size_t Trainer::total_steps() const { return std::max<std::size_t>(steps_per_epoch() * cfg_.epochs, 1); }

EpochMetrics Trainer::train_epoch() {
  const std::size_t epoch = progress_.epochs_completed;
  const Task task = model_.shape().task;
  std::vector<NodeId> order(data_.splits.train.begin(), data_.splits.train.end());
  Rng shuffle_rng(derive_sample_seed(cfg_.seed ^ kShuffleStream, epoch, 0));
  shuffle_rng.shuffle(order.begin(), order.end());

  const auto params = model_.parameters();
  const std::size_t total = total_steps();
  EpochMetrics metrics;
  metrics.epoch = epoch;
  double loss_sum = 0.0;
  Targets predicted;

  for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
    std::span<const NodeId> chunk(order.data() + start, std::min(cfg_.batch_size, order.size() - start));
    const std::size_t batch_index = start / cfg_.batch_size;
    auto paths = sample_many(data_.graph, chunk, cfg_.plan, cfg_.seed, epoch, cfg_.workers);
    Rng dropout_rng(derive_sample_seed(cfg_.seed ^ kDropoutStream, epoch, batch_index));

    for (const auto& p : params) {
      Tensor<float> t = p.tensor;
      t.zero_grad();
    }
    Tape<float> tape(true);
    auto out = model_.forward(tape, data_.graph, paths, true, dropout_rng);
    Targets truth = gather_targets(data_.labels, chunk);
    Tensor<float> batch_loss = loss(tape, out.logits, truth, task);
    const double loss_value = batch_loss.item();
    const double lr = lr_at(std::min<std::size_t>(optimizer_.step, total), total, cfg_.lr, cfg_.warmup_ratio);

    auto fail = [&](const std::string& what, double norm) {
      std::ostringstream msg;
      msg << what << " at epoch " << epoch << " step " << optimizer_.step << " (lr " << lr << ", loss "
          << loss_value << ", grad norm " << norm << ")";
      throw Error(ErrorCode::kNonFiniteLoss, msg.str());
    };
    if (!std::isfinite(loss_value)) fail("non-finite loss", std::nan(""));

    tape.backward(batch_loss);
    const double norm = clip_grad_norm<float>(params, cfg_.clip_norm);
    if (!std::isfinite(norm)) fail("non-finite gradient", norm);
    adam_step<float>(params, optimizer_, lr);
    std::string bad;
    if (!all_finite(params, &bad)) fail("non-finite parameter " + bad, norm);

    auto rows = predict_rows(out.logits, task);
    predicted.single.insert(predicted.single.end(), rows.single.begin(), rows.single.end());
    predicted.multi.insert(predicted.multi.end(), rows.multi.begin(), rows.multi.end());
    loss_sum += loss_value * static_cast<double>(chunk.size());
    metrics.last_lr = lr;
    ++metrics.steps;
    if (log_ != nullptr && log_steps_) {
      *log_ << nlohmann::json{{"event", "step"}, {"epoch", epoch}, {"step", optimizer_.step},
                              {"lr", lr},        {"loss", loss_value}, {"grad_norm", norm}}
                   .dump()
            << '\n';
    }
  }

  metrics.mean_loss = loss_sum / static_cast<double>(order.size());
  metrics.train_f1 = micro_f1(predicted, gather_targets(data_.labels, order), task);
  progress_.epochs_completed = epoch + 1;
  progress_.epoch_losses.push_back(metrics.mean_loss);
  return metrics;
}

FitResult Trainer::fit(const EpochCallback& on_epoch) {
  FitResult result;
  const bool has_val = !data_.splits.val.empty();
  while (progress_.epochs_completed < cfg_.epochs && !progress_.stopped_early) {
    EpochMetrics m = train_epoch();
    if (has_val) {
      m.val_f1 = eval_split(model_, data_, Split::kVal, cfg_, cfg_.seed).micro_f1;
      if (m.val_f1 > progress_.best_val_f1) {
        progress_.best_val_f1 = m.val_f1;
        progress_.epochs_since_best = 0;
      } else {
        ++progress_.epochs_since_best;
        if (cfg_.patience > 0 && progress_.epochs_since_best >= cfg_.patience) progress_.stopped_early = true;
      }
    }
    if (log_ != nullptr) {
      *log_ << nlohmann::json{{"event", "epoch"},     {"epoch", m.epoch},       {"loss", m.mean_loss},
                              {"train_f1", m.train_f1}, {"val_f1", m.val_f1}, {"lr", m.last_lr}}
                   .dump()
            << '\n';
    }
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.stopped_early = progress_.stopped_early;
  return result;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.config = cfg_;
  ckpt.dataset = dataset_name_;
  ckpt.model = model_.cast<float>();
  ckpt.optimizer = optimizer_;
  ckpt.progress = progress_;
  return ckpt;
}

}  // namespace pathsage
