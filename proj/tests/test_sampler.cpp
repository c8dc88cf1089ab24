// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <map>
#include <unordered_set>

#include <gtest/gtest.h>

#include "pathsage/error.hpp"
#include "pathsage/random.hpp"
#include "pathsage/sampler.hpp"
#include "test_util.hpp"

namespace pathsage {
namespace {

Graph star(std::size_t leaves) {
  std::vector<Edge> edges;
  for (std::size_t i = 1; i <= leaves; ++i) edges.emplace_back(0, static_cast<NodeId>(i));
  return Graph::from_edges(leaves + 1, edges, testing::random_features(leaves + 1, 1, 0), false);
}

Graph triangle() {
  std::vector<Edge> edges{{0, 1}, {1, 2}, {0, 2}};
  return Graph::from_edges(3, edges, testing::random_features(3, 1, 0), false);
}

TEST(SamplePlan, Defaults) {
  SamplePlan p = SamplePlan::defaults();
  EXPECT_EQ(p.counts, (std::vector<std::uint32_t>{5, 5, 5, 5, 5, 10, 10, 10}));
  EXPECT_EQ(p.depth(), 8u);
  EXPECT_EQ(p.total_paths(), 55u);
}

TEST(SamplePlan, Validation) {
  EXPECT_THROW(SamplePlan{}.validate(), Error);
  EXPECT_THROW((SamplePlan{{2, 0}}).validate(), Error);
  try {
    SamplePlan{{}}.validate();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidPlan);
  }
}

TEST(Sampler, StarFromCenterHitsLeaves) {
  Graph g = star(6);
  Rng rng(3);
  PathBatch b = sample_paths(g, 0, SamplePlan{{20, 20}}, rng);
  for (std::size_t i = 0; i < 20; ++i) {
    auto p1 = b.bucket(1).path(i);
    EXPECT_EQ(p1[0], 0u);
    EXPECT_GE(p1[1], 1u);
    auto p2 = b.bucket(2).path(i);
    EXPECT_EQ(p2[2], 0u);  // a leaf's only neighbor is the center
  }
}

TEST(Sampler, TriangleBucketsAndFrequencies) {
  Graph g = triangle();
  Rng rng(42);
  PathBatch b = sample_paths(g, 0, SamplePlan{{2, 2}}, rng);
  EXPECT_EQ(b.central, 0u);
  EXPECT_EQ(b.bucket(1).size(), 2u);
  EXPECT_EQ(b.bucket(1).path(0).size(), 2u);
  EXPECT_EQ(b.bucket(2).size(), 2u);
  EXPECT_EQ(b.bucket(2).path(0).size(), 3u);

  const std::size_t walks = 100000;
  PathBatch many = sample_paths(g, 0, SamplePlan{{static_cast<std::uint32_t>(walks)}}, rng);
  std::size_t to_one = 0;
  for (std::size_t i = 0; i < walks; ++i) to_one += many.bucket(1).path(i)[1] == 1;
  EXPECT_NEAR(static_cast<double>(to_one) / walks, 0.5, 0.01);
}

TEST(Sampler, AdjacencyValidityAndCounts) {
  const std::size_t n = 500;
  Graph g = Graph::from_edges(n, testing::random_edges(n, 1200, 8), testing::random_features(n, 1, 0), false);
  SamplePlan plan{{3, 1, 4, 2, 5}};
  for (NodeId c = 0; c < n; c += 7) {
    PathBatch b = sample_paths(g, c, plan, 99, 0);
    ASSERT_EQ(b.buckets.size(), plan.depth());
    for (std::size_t l = 1; l <= plan.depth(); ++l) {
      const auto& bucket = b.bucket(l);
      EXPECT_EQ(bucket.length, l);
      ASSERT_EQ(bucket.size(), plan.count(l));
      for (std::size_t i = 0; i < bucket.size(); ++i) {
        auto p = bucket.path(i);
        EXPECT_EQ(p[0], c);
        for (std::size_t s = 0; s + 1 < p.size(); ++s) EXPECT_TRUE(g.has_edge(p[s], p[s + 1]));
      }
    }
  }
}

TEST(Sampler, Deterministic) {
  Graph g = Graph::from_edges(50, testing::random_edges(50, 120, 2), testing::random_features(50, 1, 0), false);
  SamplePlan plan{{4, 4, 4}};
  EXPECT_EQ(sample_paths(g, 7, plan, 5, 2), sample_paths(g, 7, plan, 5, 2));
  EXPECT_NE(sample_paths(g, 7, plan, 5, 2), sample_paths(g, 7, plan, 5, 3));
  std::vector<NodeId> centrals{1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto one = sample_many(g, centrals, plan, 5, 2, 1);
  auto four = sample_many(g, centrals, plan, 5, 2, 4);
  EXPECT_EQ(one, four);
  EXPECT_EQ(one[6], sample_paths(g, 7, plan, 5, 2));
}

TEST(Sampler, Errors) {
  Graph g = triangle();
  Rng rng(0);
  try {
    sample_paths(g, 3, SamplePlan{{1}}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIndexOutOfRange);
  }
  try {
    sample_paths(g, 0, SamplePlan{{1, 0}}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidPlan);
  }
}

TEST(SampleSeed, Basics) {
  EXPECT_EQ(derive_sample_seed(1, 2, 3), derive_sample_seed(1, 2, 3));
  EXPECT_NE(derive_sample_seed(0, 0, 0), derive_sample_seed(0, 0, 1));
  EXPECT_NE(derive_sample_seed(0, 0, 0), derive_sample_seed(0, 1, 0));
  EXPECT_NE(derive_sample_seed(0, 0, 0), derive_sample_seed(1, 0, 0));
}

TEST(SampleSeed, NoCollisionsOverAMillion) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(1 << 21);
  for (std::uint64_t epoch = 0; epoch < 10; ++epoch) {
    for (std::uint64_t node = 0; node < 100000; ++node) seen.insert(derive_sample_seed(17, epoch, node));
  }
  EXPECT_EQ(seen.size(), 1000000u);
}

TEST(Rng, UniformIndexIsUnbiased) {
  Rng rng(1);
  std::vector<std::size_t> hist(7, 0);
  const std::size_t draws = 700000;
  for (std::size_t i = 0; i < draws; ++i) ++hist[rng.uniform_index(7)];
  const double p = 1.0 / 7.0;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (auto h : hist) EXPECT_LT(std::abs(static_cast<double>(h) - draws * p), 4 * sigma);
}

}  // namespace
}  // namespace pathsage
