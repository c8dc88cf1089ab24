// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pathsage/graph.hpp"

namespace pathsage {

// Planted k-hop benchmark: every node carries a hidden class attribute
// (one-hot in the first num_classes feature columns, followed by Gaussian
// noise columns) and its label is the majority attribute over the nodes at
// shortest-path distance exactly k.
struct SynthOptions {
  std::size_t num_nodes = 200;
  double avg_degree = 3.0;
  std::size_t k = 1;
  std::size_t num_classes = 3;
  std::uint64_t seed = 0;
  std::size_t noise_dims = 4;
  double noise_std = 1.0;
};

struct SynthResult {
  std::vector<Edge> edges;
  std::vector<std::int32_t> attributes;
  Dataset dataset;
  std::size_t attempts = 0;
};

// Nodes at exact BFS distance k from u (ascending ids).
std::vector<NodeId> exact_hop_ring(const Graph& g, NodeId u, std::size_t k);

// Majority attribute over each node's exact k-hop ring, ties to the
// smallest class. Throws DegenerateGraph if some ring is empty.
std::vector<std::int32_t> plant_khop_labels(const Graph& g, std::span<const std::int32_t> attributes,
                                            std::size_t k, std::size_t num_classes);

// Generates the dataset in memory (connected random graph: random recursive
// tree plus uniform extra edges), regenerating up to 10 times if a ring is
// empty. Split is 60/20/20.
SynthResult make_planted_khop(const SynthOptions& options);

// make_planted_khop and write the five dataset files into `dir`.
SynthResult synth_planted_khop(const SynthOptions& options, const std::filesystem::path& dir);

// Writes an in-memory dataset (with its raw edge list) to `dir`.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                   std::span<const Edge> edges);

}  // namespace pathsage
