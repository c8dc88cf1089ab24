// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "pathsage/checkpoint.hpp"
#include "pathsage/error.hpp"
#include "pathsage/trainer.hpp"
#include "test_util.hpp"

namespace pathsage {
namespace {

using testing::TempDir;

Dataset small_dataset() {
  auto edges = testing::random_edges(60, 150, 21);
  return testing::make_dataset(60, edges, 5, 3, 22);
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.plan = SamplePlan{{2, 2}};
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.batch_size = 8;
  cfg.epochs = 4;
  cfg.seed = 5;
  return cfg;
}

std::vector<float> flat_params(const PathSageModel<float>& model) {
  std::vector<float> out;
  for (const auto& p : model.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

TEST(Trainer, ZeroLearningRateKeepsParameters) {
  Dataset data = small_dataset();
  TrainConfig cfg = tiny_config();
  cfg.lr = 0.0;
  Trainer trainer(data, cfg);
  auto before = flat_params(trainer.model());
  EpochMetrics m = trainer.train_epoch();
  EXPECT_EQ(flat_params(trainer.model()), before);
  EXPECT_EQ(m.steps, trainer.steps_per_epoch());
  EXPECT_EQ(trainer.optimizer().step, trainer.steps_per_epoch());
}

TEST(Trainer, StepCountsAndSchedule) {
  Dataset data = small_dataset();
  Trainer trainer(data, tiny_config());
  EXPECT_EQ(trainer.steps_per_epoch(), (data.splits.train.size() + 7) / 8);
  EXPECT_EQ(trainer.total_steps(), trainer.steps_per_epoch() * 4);
  FitResult r = trainer.fit();
  EXPECT_EQ(r.epochs.size(), 4u);
  EXPECT_EQ(trainer.optimizer().step, trainer.total_steps());
  for (const auto& e : r.epochs) {
    EXPECT_TRUE(std::isfinite(e.mean_loss));
    EXPECT_GE(e.val_f1, 0.0);
  }
}

TEST(Trainer, DeterministicLossCurve) {
  Dataset data = small_dataset();
  Trainer a(data, tiny_config());
  Trainer b(data, tiny_config());
  a.fit();
  b.fit();
  EXPECT_EQ(a.progress().epoch_losses, b.progress().epoch_losses);
  EXPECT_EQ(flat_params(a.model()), flat_params(b.model()));
}

TEST(Trainer, WorkerCountDoesNotChangeResults) {
  Dataset data = small_dataset();
  TrainConfig one = tiny_config();
  TrainConfig three = tiny_config();
  three.workers = 3;
  Trainer a(data, one);
  Trainer b(data, three);
  a.fit();
  b.fit();
  EXPECT_EQ(a.progress().epoch_losses, b.progress().epoch_losses);
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  Dataset data = small_dataset();
  TempDir dir;
  Trainer full(data, tiny_config());
  full.fit();

  Trainer first(data, tiny_config());
  first.train_epoch();
  first.train_epoch();
  save_checkpoint(first.checkpoint(), dir / "half.psck");
  Trainer resumed(data, load_checkpoint(dir / "half.psck"));
  resumed.fit();
  EXPECT_EQ(resumed.progress().epoch_losses, full.progress().epoch_losses);
  EXPECT_EQ(flat_params(resumed.model()), flat_params(full.model()));
}

TEST(Trainer, EarlyStoppingHonoursPatience) {
  Dataset data = small_dataset();
  TrainConfig cfg = tiny_config();
  cfg.epochs = 200;
  cfg.patience = 2;
  cfg.lr = 0.0;  // val score never improves after the first epoch
  Trainer trainer(data, cfg);
  FitResult r = trainer.fit();
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.epochs.size(), 3u);
}

TEST(Trainer, SingleNodeLossDecreasesAfterWarmup) {
  FeatureMatrix f = testing::random_features(1, 4, 3);
  Dataset data;
  data.graph = Graph::from_edges(1, {}, f, false);
  data.labels.task = Task::kSingleLabel;
  data.labels.num_classes = 3;
  data.labels.single = {2};
  data.splits.train = {0};
  TrainConfig cfg = tiny_config();
  cfg.epochs = 50;
  cfg.batch_size = 1;
  // With one sample per step, dropout noise alone exceeds the allowed uptick.
  cfg.dropout_encoder = 0.0;
  cfg.dropout_output = 0.0;
  Trainer trainer(data, cfg);
  trainer.fit();
  const auto& losses = trainer.progress().epoch_losses;
  ASSERT_EQ(losses.size(), 50u);
  const std::size_t warmup = warmup_steps(trainer.total_steps(), cfg.warmup_ratio);
  for (std::size_t e = warmup + 1; e < losses.size(); ++e) {
    EXPECT_LE(losses[e], losses[e - 1] * 1.05) << "epoch " << e;
  }
  EXPECT_LT(losses.back(), losses.front());
}

TEST(Trainer, RejectsMismatchedCheckpoint) {
  Dataset data = small_dataset();
  Trainer trainer(data, tiny_config());
  Checkpoint ckpt = trainer.checkpoint();
  auto edges = testing::random_edges(30, 60, 1);
  Dataset other = testing::make_dataset(30, edges, 7, 3, 2);
  EXPECT_THROW(Trainer(other, ckpt), Error);
}

TEST(Checkpoint, RoundTripIsExact) {
  Dataset data = small_dataset();
  TempDir dir;
  Trainer trainer(data, tiny_config(), "somewhere");
  trainer.train_epoch();
  Checkpoint ckpt = trainer.checkpoint();
  save_checkpoint(ckpt, dir / "a.psck");
  Checkpoint back = load_checkpoint(dir / "a.psck");
  EXPECT_EQ(back.config, ckpt.config);
  EXPECT_EQ(back.dataset, "somewhere");
  EXPECT_EQ(back.progress, ckpt.progress);
  EXPECT_EQ(back.optimizer.step, ckpt.optimizer.step);
  EXPECT_EQ(back.optimizer.m, ckpt.optimizer.m);
  EXPECT_EQ(back.optimizer.v, ckpt.optimizer.v);
  EXPECT_EQ(flat_params(back.model), flat_params(ckpt.model));
  save_checkpoint(back, dir / "b.psck");
  std::ifstream fa(dir / "a.psck", std::ios::binary), fb(dir / "b.psck", std::ios::binary);
  std::vector<char> ba{std::istreambuf_iterator<char>(fa), {}}, bb{std::istreambuf_iterator<char>(fb), {}};
  EXPECT_EQ(ba, bb);
  EXPECT_EQ(checkpoint_crc(dir / "a.psck"), checkpoint_crc(dir / "b.psck"));
}

ErrorCode decode_error(std::vector<std::uint8_t> bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decoded";
  return ErrorCode::kInvalidConfig;
}

TEST(Checkpoint, CorruptionIsDetected) {
  Dataset data = small_dataset();
  Trainer trainer(data, tiny_config());
  auto bytes = serialize_checkpoint(trainer.checkpoint());
  EXPECT_EQ(decode_error({bytes.begin(), bytes.begin() + bytes.size() / 2}), ErrorCode::kChecksumMismatch);
  EXPECT_EQ(decode_error({bytes.begin(), bytes.begin() + 10}), ErrorCode::kChecksumMismatch);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  EXPECT_EQ(decode_error(flipped), ErrorCode::kChecksumMismatch);
  auto version = bytes;
  version[4] = 9;
  EXPECT_EQ(decode_error(version), ErrorCode::kVersionMismatch);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(decode_error(magic), ErrorCode::kMalformedRecord);
}

TEST(Checkpoint, Crc64KnownValue) {
  // CRC-64/XZ check value for "123456789".
  const std::string s = "123456789";
  std::vector<std::uint8_t> bytes(s.begin(), s.end());
  EXPECT_EQ(crc64(bytes), 0x995DC9BBDF1939FAull);
}

TEST(Checkpoint, MissingFileIsIoError) {
  try {
    load_checkpoint("/nonexistent/dir/x.psck");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

}  // namespace
}  // namespace pathsage
