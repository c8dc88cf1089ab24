// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pathsage/graph.hpp"
#include "pathsage/random.hpp"

namespace pathsage {

// How many random-walk paths to draw for each length 1..depth().
struct SamplePlan {
  std::vector<std::uint32_t> counts;

  std::size_t depth() const { return counts.size(); }
  std::uint32_t count(std::size_t length) const { return counts.at(length - 1); }
  std::size_t total_paths() const;

  // Throws InvalidPlan unless depth >= 1 and every count >= 1.
  void validate() const;

  // Depth 8 with [5, 5, 5, 5, 5, 10, 10, 10].
  static SamplePlan defaults();

  bool operator==(const SamplePlan&) const = default;
};

// All paths of one length. Each path has length + 1 node ids, the central
// node first; paths are stored back to back.
struct LengthBucket {
  std::size_t length = 0;
  std::vector<NodeId> nodes;

  std::size_t tokens() const { return length + 1; }
  std::size_t size() const { return nodes.size() / tokens(); }
  std::span<const NodeId> path(std::size_t i) const {
    return {nodes.data() + i * tokens(), tokens()};
  }
  bool operator==(const LengthBucket&) const = default;
};

struct PathBatch {
  NodeId central = 0;
  std::vector<LengthBucket> buckets;  // buckets[l - 1] holds length-l paths

  const LengthBucket& bucket(std::size_t length) const { return buckets.at(length - 1); }
  bool operator==(const PathBatch&) const = default;
};

// Uniform random walks from `central`; for each length l the walk is
// restarted from the central node, revisits and backtracking allowed.
PathBatch sample_paths(const Graph& g, NodeId central, const SamplePlan& plan, Rng& rng);

// Same, seeded from derive_sample_seed(global_seed, epoch, central).
PathBatch sample_paths(const Graph& g, NodeId central, const SamplePlan& plan,
                       std::uint64_t global_seed, std::uint64_t epoch);

// Samples every node in `centrals` (order preserved), splitting the work
// over `workers` threads. Result does not depend on the worker count.
std::vector<PathBatch> sample_many(const Graph& g, std::span<const NodeId> centrals,
                                   const SamplePlan& plan, std::uint64_t global_seed,
                                   std::uint64_t epoch, unsigned workers = 1);

}  // namespace pathsage
