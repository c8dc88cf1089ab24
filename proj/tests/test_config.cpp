// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include <gtest/gtest.h>

#include "pathsage/config.hpp"
#include "pathsage/error.hpp"
#include "test_util.hpp"

namespace pathsage {
namespace {

ErrorCode error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::kIoError;
}

TEST(Config, Defaults) {
  RunConfig cfg = resolve_config({}, {});
  EXPECT_EQ(cfg.train.plan.counts, (std::vector<std::uint32_t>{5, 5, 5, 5, 5, 10, 10, 10}));
  EXPECT_EQ(cfg.train.hidden, 128u);
  EXPECT_EQ(cfg.train.heads, 8u);
  EXPECT_EQ(cfg.train.layers, 2u);
  EXPECT_EQ(cfg.train.batch_size, 32u);
  EXPECT_EQ(cfg.train.lr, 1e-3);
  EXPECT_EQ(cfg.train.warmup_ratio, 0.1);
  EXPECT_EQ(cfg.train.dropout_output, 0.3);
  EXPECT_EQ(cfg.train.clip_norm, 5.0);
  EXPECT_EQ(cfg.train.patience, 10u);
}

TEST(Config, FlagsOverrideFileOverridesDefaults) {
  ConfigLayer file = config_layer_from_json(
      nlohmann::json::parse(R"({"hidden": 64, "lr": 0.01, "seed": 3, "dataset": "a"})"));
  ConfigLayer flags;
  flags.lr = 0.002;
  flags.dataset = "b";
  RunConfig cfg = resolve_config(file, flags);
  EXPECT_EQ(cfg.train.hidden, 64u);
  EXPECT_EQ(cfg.train.lr, 0.002);
  EXPECT_EQ(cfg.train.seed, 3u);
  EXPECT_EQ(cfg.dataset, "b");
  EXPECT_EQ(cfg.train.heads, 8u);
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_EQ(error_of([] { config_layer_from_json(nlohmann::json::parse(R"({"hiden": 3})")); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(error_of([] { config_layer_from_json(nlohmann::json::array()); }), ErrorCode::kInvalidConfig);
}

TEST(Config, ReadFile) {
  testing::TempDir dir;
  std::ofstream(dir / "c.json") << R"({"depth": 3, "epochs": 7})";
  RunConfig cfg = resolve_config(read_config_file((dir / "c.json").string()), {});
  EXPECT_EQ(cfg.train.plan.counts, (std::vector<std::uint32_t>{5, 5, 5}));
  EXPECT_EQ(cfg.train.epochs, 7u);
}

TEST(Config, DepthAndCounts) {
  ConfigLayer deep;
  deep.depth = 10;
  EXPECT_EQ(resolve_config({}, deep).train.plan.counts,
            (std::vector<std::uint32_t>{5, 5, 5, 5, 5, 10, 10, 10, 10, 10}));

  // Counts in the file, depth on the command line: depth wins, counts resize.
  ConfigLayer file;
  file.counts = std::vector<std::uint32_t>{1, 2, 3};
  ConfigLayer flags;
  flags.depth = 2;
  EXPECT_EQ(resolve_config(file, flags).train.plan.counts, (std::vector<std::uint32_t>{1, 2}));

  ConfigLayer conflict;
  conflict.depth = 2;
  conflict.counts = std::vector<std::uint32_t>{1, 2, 3};
  EXPECT_EQ(error_of([&] { resolve_config({}, conflict); }), ErrorCode::kInvalidConfig);
}

TEST(Config, Validation) {
  ConfigLayer bad;
  bad.batch_size = 0;
  EXPECT_EQ(error_of([&] { resolve_config({}, bad); }), ErrorCode::kInvalidConfig);
  ConfigLayer ratio;
  ratio.warmup_ratio = 1.5;
  EXPECT_EQ(error_of([&] { resolve_config({}, ratio); }), ErrorCode::kInvalidConfig);
  ConfigLayer runs;
  runs.runs = 0;
  EXPECT_EQ(error_of([&] { resolve_config({}, runs); }), ErrorCode::kInvalidConfig);
}

TEST(Config, ParseCounts) {
  EXPECT_EQ(parse_counts("4"), (std::vector<std::uint32_t>{4}));
  EXPECT_EQ(parse_counts("1,20,3"), (std::vector<std::uint32_t>{1, 20, 3}));
  for (const char* bad : {"", "1,,2", "a", "1,", "-1", "2 ,3"}) {
    EXPECT_EQ(error_of([&] { parse_counts(bad); }), ErrorCode::kInvalidConfig) << bad;
  }
}

TEST(Config, JsonRoundTrip) {
  TrainConfig cfg;
  cfg.plan = SamplePlan{{3, 1}};
  cfg.seed = 99;
  cfg.lr = 0.25;
  EXPECT_EQ(train_config_from_json(to_json(cfg)), cfg);
}

}  // namespace
}  // namespace pathsage
