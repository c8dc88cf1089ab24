// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "pathsage/error.hpp"
#include "pathsage/graph.hpp"
#include "test_util.hpp"

namespace pathsage {
namespace {

using testing::TempDir;

Graph undirected(std::size_t n, std::vector<Edge> edges) {
  return Graph::from_edges(n, edges, testing::random_features(n, 2, 1), false);
}

std::vector<std::uint64_t> offsets_of(const Graph& g) { return {g.offsets().begin(), g.offsets().end()}; }

std::vector<NodeId> neighbors(const Graph& g, NodeId u) {
  auto s = g.neighbors_of(u);
  return {s.begin(), s.end()};
}

TEST(Graph, TriangleIsSymmetric) {
  Graph g = undirected(3, {{0, 1}, {1, 2}, {0, 2}});
  EXPECT_EQ(offsets_of(g), (std::vector<std::uint64_t>{0, 2, 4, 6}));
  for (NodeId u = 0; u < 3; ++u) EXPECT_EQ(g.degree(u), 2u);
  EXPECT_EQ(neighbors(g, 0), (std::vector<NodeId>{1, 2}));
}

TEST(Graph, IsolatedNodeGetsSelfLoop) {
  Graph g = undirected(1, {});
  EXPECT_EQ(offsets_of(g), (std::vector<std::uint64_t>{0, 1}));
  EXPECT_EQ(neighbors(g, 0), (std::vector<NodeId>{0}));
}

TEST(Graph, PathGraphOffsets) {
  Graph g = undirected(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  EXPECT_EQ(offsets_of(g), (std::vector<std::uint64_t>{0, 1, 3, 5, 7, 8}));
  EXPECT_EQ(neighbors(g, 2), (std::vector<NodeId>{1, 3}));
}

TEST(Graph, DuplicateEdgesCollapse) {
  Graph g = undirected(3, {{0, 1}, {1, 0}, {0, 1}, {1, 2}});
  EXPECT_EQ(neighbors(g, 1), (std::vector<NodeId>{0, 2}));
}

TEST(Graph, DirectedKeepsOrientation) {
  Graph g = Graph::from_edges(3, std::vector<Edge>{{0, 1}, {1, 2}}, testing::random_features(3, 1, 0), true);
  EXPECT_EQ(neighbors(g, 0), (std::vector<NodeId>{1}));
  EXPECT_EQ(neighbors(g, 1), (std::vector<NodeId>{2}));
  EXPECT_EQ(neighbors(g, 2), (std::vector<NodeId>{2}));  // sink: self-loop
}

TEST(Graph, OutOfRangeQueries) {
  Graph g = undirected(3, {{0, 1}});
  try {
    g.neighbors_of(3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIndexOutOfRange);
  }
  EXPECT_THROW(undirected(2, {{0, 5}}), Error);
}

TEST(Graph, RandomGraphInvariants) {
  const std::size_t n = 300;
  auto edges = testing::random_edges(n, 700, 11);
  Graph g = undirected(n, edges);
  auto off = g.offsets();
  EXPECT_EQ(off.front(), 0u);
  EXPECT_EQ(off.back(), g.neighbors().size());
  EXPECT_TRUE(std::is_sorted(off.begin(), off.end()));
  std::size_t degree_sum = 0;
  for (NodeId u = 0; u < n; ++u) {
    degree_sum += g.degree(u);
    EXPECT_GE(g.degree(u), 1u);
    auto nb = g.neighbors_of(u);
    EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
    for (NodeId v : nb) {
      ASSERT_LT(v, n);
      if (v != u) {
        EXPECT_TRUE(g.has_edge(v, u));
      }
    }
  }
  EXPECT_EQ(degree_sum, g.neighbors().size());
  for (auto [u, v] : edges) {
    EXPECT_TRUE(g.has_edge(u, v));
    EXPECT_TRUE(g.has_edge(v, u));
  }
}

// Writes the raw five-file layout.
void write_raw(const TempDir& dir, const std::string& meta, const std::string& edges,
               const std::string& labels, const std::string& splits, std::size_t rows, std::size_t cols) {
  std::ofstream(dir / "meta.json") << meta;
  std::ofstream(dir / "edges.csv") << edges;
  std::ofstream(dir / "labels.csv") << labels;
  std::ofstream(dir / "splits.json") << splits;
  write_features(dir / "features.bin", testing::random_features(rows, cols, 5));
}

const char* kMeta = R"({"num_nodes":4,"feature_dim":3,"num_classes":2,"task":"single_label","directed":false})";
const char* kSplits = R"({"train":[0,1],"val":[2],"test":[3]})";

ErrorCode load_error(const TempDir& dir) {
  try {
    load_dataset(dir.path());
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "load_dataset succeeded";
  return ErrorCode::kInvalidConfig;
}

TEST(LoadDataset, ReadsAllFiles) {
  TempDir dir;
  write_raw(dir, kMeta, "0,1\n1,2\n", "0,1\n1,0\n2,1\n3,0\n", kSplits, 4, 3);
  Dataset d = load_dataset(dir.path());
  EXPECT_EQ(d.graph.num_nodes(), 4u);
  EXPECT_EQ(neighbors(d.graph, 3), (std::vector<NodeId>{3}));
  EXPECT_EQ(d.labels.single, (std::vector<std::int32_t>{1, 0, 1, 0}));
  EXPECT_EQ(d.splits.train, (std::vector<NodeId>{0, 1}));
  EXPECT_EQ(d.graph.features(), testing::random_features(4, 3, 5));
  EXPECT_EQ(d, load_dataset(dir.path()));  // deterministic
}

TEST(LoadDataset, MultiLabel) {
  TempDir dir;
  write_raw(dir,
            R"({"num_nodes":4,"feature_dim":3,"num_classes":3,"task":"multi_label","directed":false})",
            "0,1\n", "0,0;2\n1,\n2,1\n3,0;1;2\n", kSplits, 4, 3);
  Dataset d = load_dataset(dir.path());
  EXPECT_EQ(d.labels.task, Task::kMultiLabel);
  EXPECT_EQ(d.labels.multi, (std::vector<std::uint8_t>{1, 0, 1, 0, 0, 0, 0, 1, 0, 1, 1, 1}));
}

TEST(LoadDataset, MissingFile) {
  TempDir dir;
  write_raw(dir, kMeta, "0,1\n", "0,1\n1,0\n2,1\n3,0\n", kSplits, 4, 3);
  std::filesystem::remove(dir / "edges.csv");
  EXPECT_EQ(load_error(dir), ErrorCode::kMissingFile);
}

TEST(LoadDataset, MalformedEdgeReportsLine) {
  TempDir dir;
  write_raw(dir, kMeta, "0,1\n1;2\n", "0,1\n1,0\n2,1\n3,0\n", kSplits, 4, 3);
  try {
    load_dataset(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedRecord);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, EdgeOutOfRange) {
  TempDir dir;
  write_raw(dir, kMeta, "0,4\n", "0,1\n1,0\n2,1\n3,0\n", kSplits, 4, 3);
  EXPECT_EQ(load_error(dir), ErrorCode::kIndexOutOfRange);
}

TEST(LoadDataset, FeatureRowsMismatch) {
  TempDir dir;
  write_raw(dir, kMeta, "0,1\n", "0,1\n1,0\n2,1\n3,0\n", kSplits, 5, 3);
  EXPECT_EQ(load_error(dir), ErrorCode::kDimensionMismatch);
}

TEST(LoadDataset, SplitOverlap) {
  TempDir dir;
  write_raw(dir, kMeta, "0,1\n", "0,1\n1,0\n2,1\n3,0\n", R"({"train":[0,1],"val":[1],"test":[3]})", 4, 3);
  EXPECT_EQ(load_error(dir), ErrorCode::kSplitOverlap);
}

TEST(LoadDataset, LabelOutOfRange) {
  TempDir dir;
  write_raw(dir, kMeta, "0,1\n", "0,1\n1,2\n2,1\n3,0\n", kSplits, 4, 3);
  EXPECT_EQ(load_error(dir), ErrorCode::kIndexOutOfRange);
}

TEST(LoadDataset, FeaturesRoundTrip) {
  TempDir dir;
  auto m = testing::random_features(7, 5, 9);
  write_features(dir / "f.bin", m);
  EXPECT_EQ(read_features(dir / "f.bin"), m);
  EXPECT_EQ(std::filesystem::file_size(dir / "f.bin"), 4u + 4u + 8u + 8u + 7u * 5u * 4u);
}

TEST(LoadDataset, WritersRoundTrip) {
  TempDir dir;
  auto edges = testing::random_edges(40, 80, 3);
  Dataset d = testing::make_dataset(40, edges, 6, 3, 4);
  write_meta(dir / "meta.json", DatasetMeta{40, 6, 3, Task::kSingleLabel, false});
  write_edges(dir / "edges.csv", edges);
  write_features(dir / "features.bin", d.graph.features());
  write_labels(dir / "labels.csv", d.labels);
  write_splits(dir / "splits.json", d.splits);
  EXPECT_EQ(load_dataset(dir.path()), d);
}

}  // namespace
}  // namespace pathsage
