// SPDX-License-Identifier: Apache-2.0
#include "pathsage/sampler.hpp"

#include <numeric>
#include <string>

#include "pathsage/error.hpp"
#include "pathsage/parallel.hpp"

namespace pathsage {

std::size_t SamplePlan::total_paths() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

void SamplePlan::validate() const {
  if (counts.empty()) throw Error(ErrorCode::kInvalidPlan, "sample depth must be >= 1");
  for (std::size_t l = 0; l < counts.size(); ++l) {
    if (counts[l] == 0) {
      throw Error(ErrorCode::kInvalidPlan, "path count for length " + std::to_string(l + 1) + " is 0");
    }
  }
}

SamplePlan SamplePlan::defaults() { return SamplePlan{{5, 5, 5, 5, 5, 10, 10, 10}}; }

PathBatch sample_paths(const Graph& g, NodeId central, const SamplePlan& plan, Rng& rng) {
  plan.validate();
  if (central >= g.num_nodes()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "central node " + std::to_string(central) + " >= " + std::to_string(g.num_nodes()));
  }
  PathBatch batch;
  batch.central = central;
  batch.buckets.resize(plan.depth());
  for (std::size_t l = 1; l <= plan.depth(); ++l) {
    LengthBucket& bucket = batch.buckets[l - 1];
    bucket.length = l;
    bucket.nodes.reserve(plan.count(l) * (l + 1));
    for (std::uint32_t i = 0; i < plan.count(l); ++i) {
      NodeId u = central;
      bucket.nodes.push_back(u);
      for (std::size_t step = 0; step < l; ++step) {
        auto next = g.neighbors_of(u);
        u = next[rng.uniform_index(next.size())];
        bucket.nodes.push_back(u);
      }
    }
  }
  return batch;
}

PathBatch sample_paths(const Graph& g, NodeId central, const SamplePlan& plan,
                       std::uint64_t global_seed, std::uint64_t epoch) {
  Rng rng(derive_sample_seed(global_seed, epoch, central));
  return sample_paths(g, central, plan, rng);
}

std::vector<PathBatch> sample_many(const Graph& g, std::span<const NodeId> centrals,
                                   const SamplePlan& plan, std::uint64_t global_seed,
                                   std::uint64_t epoch, unsigned workers) {
  std::vector<PathBatch> out(centrals.size());
  parallel_for(centrals.size(), workers, [&](std::size_t i) {
    out[i] = sample_paths(g, centrals[i], plan, global_seed, epoch);
  });
  return out;
}

}  // namespace pathsage
