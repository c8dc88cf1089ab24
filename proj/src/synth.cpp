// SPDX-License-Identifier: Apache-2.0
#include "pathsage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <unordered_set>

#include "pathsage/error.hpp"
#include "pathsage/random.hpp"

namespace pathsage {

namespace fs = std::filesystem;

std::vector<NodeId> exact_hop_ring(const Graph& g, NodeId u, std::size_t k) {
  constexpr std::size_t kUnseen = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(g.num_nodes(), kUnseen);
  std::deque<NodeId> frontier{u};
  dist[u] = 0;
  std::vector<NodeId> ring;
  while (!frontier.empty()) {
    NodeId v = frontier.front();
    frontier.pop_front();
    if (dist[v] == k) {
      ring.push_back(v);
      continue;
    }
    for (NodeId w : g.neighbors_of(v)) {
      if (dist[w] != kUnseen) continue;
      dist[w] = dist[v] + 1;
      frontier.push_back(w);
    }
  }
  std::sort(ring.begin(), ring.end());
  return ring;
}

std::vector<std::int32_t> plant_khop_labels(const Graph& g, std::span<const std::int32_t> attributes,
                                            std::size_t k, std::size_t num_classes) {
  if (attributes.size() != g.num_nodes()) {
    throw Error(ErrorCode::kDimensionMismatch, "one attribute per node required");
  }
  std::vector<std::int32_t> labels(g.num_nodes());
  std::vector<std::size_t> votes(num_classes);
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    auto ring = exact_hop_ring(g, u, k);
    if (ring.empty()) {
      throw Error(ErrorCode::kDegenerateGraph,
                  "node " + std::to_string(u) + " has no nodes at distance " + std::to_string(k));
    }
    std::fill(votes.begin(), votes.end(), 0);
    for (NodeId v : ring) ++votes.at(static_cast<std::size_t>(attributes[v]));
    labels[u] = static_cast<std::int32_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return labels;
}

namespace {

std::vector<Edge> random_connected_edges(std::size_t n, double avg_degree, Rng& rng) {
  std::vector<Edge> edges;
  std::unordered_set<std::uint64_t> seen;
  auto key = [](NodeId a, NodeId b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };
  for (NodeId v = 1; v < n; ++v) {
    auto parent = static_cast<NodeId>(rng.uniform_index(v));
    edges.emplace_back(parent, v);
    seen.insert(key(parent, v));
  }
  auto target = static_cast<std::size_t>(std::llround(avg_degree * static_cast<double>(n) / 2.0));
  std::size_t max_edges = n * (n - 1) / 2;
  target = std::min(target, max_edges);
  while (edges.size() < target) {
    auto a = static_cast<NodeId>(rng.uniform_index(n));
    auto b = static_cast<NodeId>(rng.uniform_index(n));
    if (a == b || !seen.insert(key(a, b)).second) continue;
    edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  return edges;
}

}  // namespace

SynthResult make_planted_khop(const SynthOptions& options) {
  if (options.num_nodes < 10) throw Error(ErrorCode::kInvalidConfig, "synth needs at least 10 nodes");
  if (options.num_classes < 2) throw Error(ErrorCode::kInvalidConfig, "synth needs at least 2 classes");
  const std::size_t n = options.num_nodes;
  const std::size_t width = options.num_classes + options.noise_dims;

  constexpr std::size_t kMaxAttempts = 11;  // first try plus 10 retries
  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_sample_seed(options.seed, 0x5EED, attempt));
    SynthResult result;
    result.attempts = attempt + 1;
    result.edges = random_connected_edges(n, options.avg_degree, rng);

    result.attributes.resize(n);
    FeatureMatrix features{n, width, std::vector<float>(n * width, 0.0f)};
    for (std::size_t u = 0; u < n; ++u) {
      auto attr = static_cast<std::int32_t>(rng.uniform_index(options.num_classes));
      result.attributes[u] = attr;
      features.data[u * width + static_cast<std::size_t>(attr)] = 1.0f;
      for (std::size_t j = 0; j < options.noise_dims; ++j) {
        features.data[u * width + options.num_classes + j] =
            static_cast<float>(options.noise_std * rng.normal());
      }
    }

    Graph graph = Graph::from_edges(n, result.edges, std::move(features), false);
    std::vector<std::int32_t> labels;
    try {
      labels = plant_khop_labels(graph, result.attributes, options.k, options.num_classes);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDegenerateGraph) continue;
      throw;
    }

    std::vector<NodeId> order(n);
    for (std::size_t u = 0; u < n; ++u) order[u] = static_cast<NodeId>(u);
    rng.shuffle(order.begin(), order.end());
    std::size_t n_train = n * 60 / 100;
    std::size_t n_val = n * 20 / 100;
    SplitMasks splits;
    splits.train.assign(order.begin(), order.begin() + n_train);
    splits.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    splits.test.assign(order.begin() + n_train + n_val, order.end());
    for (auto* s : {&splits.train, &splits.val, &splits.test}) std::sort(s->begin(), s->end());

    result.dataset.graph = std::move(graph);
    result.dataset.labels.task = Task::kSingleLabel;
    result.dataset.labels.num_classes = options.num_classes;
    result.dataset.labels.single = std::move(labels);
    result.dataset.splits = std::move(splits);
    return result;
  }
  throw Error(ErrorCode::kDegenerateGraph,
              "every generated graph had a node with an empty " + std::to_string(options.k) +
                  "-hop ring");
}

void write_dataset(const fs::path& dir, const Dataset& dataset, std::span<const Edge> edges) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  DatasetMeta meta;
  meta.num_nodes = dataset.graph.num_nodes();
  meta.feature_dim = dataset.graph.feature_dim();
  meta.num_classes = dataset.labels.num_classes;
  meta.task = dataset.labels.task;
  meta.directed = dataset.graph.directed();
  write_meta(dir / "meta.json", meta);
  write_edges(dir / "edges.csv", edges);
  write_features(dir / "features.bin", dataset.graph.features());
  write_labels(dir / "labels.csv", dataset.labels);
  write_splits(dir / "splits.json", dataset.splits);
}

SynthResult synth_planted_khop(const SynthOptions& options, const fs::path& dir) {
  SynthResult result = make_planted_khop(options);
  write_dataset(dir, result.dataset, result.edges);
  return result;
}

}  // namespace pathsage
