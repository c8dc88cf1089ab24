// SPDX-License-Identifier: Apache-2.0
#include "pathsage/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "pathsage/error.hpp"
#include "pathsage/parallel.hpp"
#include "pathsage/sampler.hpp"

namespace pathsage {

using json = nlohmann::json;

namespace {

// Separates evaluation path streams from the training streams of the same
// seed.
constexpr std::uint64_t kEvalStream = 0xE7A1'5EEDull;

}  // namespace

ConfusionCounts confusion(const Targets& predictions, const Targets& truth, Task task) {
  ConfusionCounts c;
  if (task == Task::kSingleLabel) {
    if (predictions.single.size() != truth.single.size()) {
      throw Error(ErrorCode::kLengthMismatch, std::to_string(predictions.single.size()) +
                                                  " predictions for " +
                                                  std::to_string(truth.single.size()) + " targets");
    }
    for (std::size_t i = 0; i < truth.single.size(); ++i) {
      if (predictions.single[i] == truth.single[i]) {
        ++c.tp;
      } else {
        ++c.fp;
        ++c.fn;
      }
    }
    return c;
  }
  if (predictions.multi.size() != truth.multi.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(predictions.multi.size()) +
                                                " predicted entries for " +
                                                std::to_string(truth.multi.size()) + " targets");
  }
  for (std::size_t i = 0; i < truth.multi.size(); ++i) {
    const bool p = predictions.multi[i] != 0, t = truth.multi[i] != 0;
    if (p && t) ++c.tp;
    if (p && !t) ++c.fp;
    if (!p && t) ++c.fn;
  }
  return c;
}

double micro_f1(const ConfusionCounts& counts) {
  const double denom = 2.0 * static_cast<double>(counts.tp) + static_cast<double>(counts.fp) +
                       static_cast<double>(counts.fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(counts.tp) / denom;
}

double micro_f1(const Targets& predictions, const Targets& truth, Task task) {
  return micro_f1(confusion(predictions, truth, task));
}

template <typename T>
Targets predict_rows(const Tensor<T>& logits, Task task) {
  Targets out;
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    std::span<const T> row(logits.data().data() + r * classes, classes);
    if (task == Task::kSingleLabel) {
      out.single.push_back(predict_single(row));
    } else {
      auto bits = predict_multi(row);
      out.multi.insert(out.multi.end(), bits.begin(), bits.end());
    }
  }
  return out;
}

template Targets predict_rows(const Tensor<float>&, Task);
template Targets predict_rows(const Tensor<double>&, Task);

EvalResult eval_split(const PathSageModel<float>& model, const Dataset& data, Split split,
                      const TrainConfig& cfg, std::uint64_t seed) {
  auto nodes = data.nodes(split);
  if (nodes.empty()) throw Error(ErrorCode::kEmptySplit, std::string(to_string(split)) + " split is empty");
  const Task task = model.shape().task;
  const std::size_t batch = std::max<std::size_t>(cfg.batch_size, 1);
  const std::size_t num_batches = (nodes.size() + batch - 1) / batch;

  std::vector<Targets> predictions(num_batches);
  std::vector<double> batch_loss(num_batches);
  parallel_for(num_batches, cfg.workers, [&](std::size_t b) {
    auto chunk = nodes.subspan(b * batch, std::min(batch, nodes.size() - b * batch));
    auto paths = sample_many(data.graph, chunk, model.shape().plan, seed ^ kEvalStream, 0);
    Tape<float> tape(false);
    Rng unused(0);
    auto out = model.forward(tape, data.graph, paths, false, unused);
    Targets truth = gather_targets(data.labels, chunk);
    batch_loss[b] = static_cast<double>(loss(tape, out.logits, truth, task).item()) *
                    static_cast<double>(chunk.size());
    predictions[b] = predict_rows(out.logits, task);
  });

  Targets all;
  for (auto& p : predictions) {
    all.single.insert(all.single.end(), p.single.begin(), p.single.end());
    all.multi.insert(all.multi.end(), p.multi.begin(), p.multi.end());
  }
  EvalResult result;
  result.nodes = nodes.size();
  result.micro_f1 = micro_f1(all, gather_targets(data.labels, nodes), task);
  result.mean_loss = std::accumulate(batch_loss.begin(), batch_loss.end(), 0.0) /
                     static_cast<double>(nodes.size());
  return result;
}

EvalReport evaluate_runs(const PathSageModel<float>& model, const Dataset& data, Split split,
                         const TrainConfig& cfg, std::uint64_t seed, std::size_t runs) {
  if (runs == 0) throw Error(ErrorCode::kInvalidConfig, "runs must be >= 1");
  EvalReport report;
  report.split = split;
  report.runs = runs;
  double loss_total = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    EvalResult res = eval_split(model, data, split, cfg, seed + r);
    report.micro_f1_runs.push_back(res.micro_f1);
    loss_total += res.mean_loss;
  }
  const double n = static_cast<double>(runs);
  report.micro_f1_mean = std::accumulate(report.micro_f1_runs.begin(), report.micro_f1_runs.end(), 0.0) / n;
  if (runs > 1) {
    double ss = 0.0;
    for (double x : report.micro_f1_runs) ss += (x - report.micro_f1_mean) * (x - report.micro_f1_mean);
    report.micro_f1_std = std::sqrt(ss / (n - 1.0));
  }
  report.loss_mean = loss_total / n;
  return report;
}

json to_json(const EvalReport& report) {
  return json{{"split", std::string(to_string(report.split))},
              {"runs", report.runs},
              {"micro_f1_mean", report.micro_f1_mean},
              {"micro_f1_std", report.micro_f1_std},
              {"loss_mean", report.loss_mean}};
}

std::string format_mean_std(double mean, double std, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f±%.*f", digits, mean, digits, std);
  return buf;
}

json to_json(const AttentionRecord& record) {
  return json{{"central", record.central}, {"path", record.path},     {"layer", record.layer},
              {"head", record.head},       {"weights", record.weights}, {"labels", record.labels}};
}

AttentionRecord attention_record_from_json(const json& j) {
  AttentionRecord r;
  try {
    r.central = j.at("central").get<NodeId>();
    r.path = j.at("path").get<std::vector<NodeId>>();
    r.layer = j.at("layer").get<std::size_t>();
    r.head = j.at("head").get<std::size_t>();
    r.weights = j.at("weights").get<std::vector<std::vector<float>>>();
    r.labels = j.at("labels").get<std::vector<std::int64_t>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("attention record: ") + e.what());
  }
  const std::size_t s = r.path.size();
  if (r.labels.size() != s || r.weights.size() != s) {
    throw Error(ErrorCode::kMalformedRecord, "attention record sizes disagree with its path");
  }
  for (const auto& row : r.weights) {
    if (row.size() != s) throw Error(ErrorCode::kMalformedRecord, "attention matrix is not square");
  }
  return r;
}

std::vector<AttentionRecord> collect_attention(const PathSageModel<float>& model, const Dataset& data,
                                               NodeId node, std::uint64_t seed) {
  if (node >= data.graph.num_nodes()) {
    throw Error(ErrorCode::kIndexOutOfRange, "node " + std::to_string(node) + " not in dataset");
  }
  const auto& plan = model.shape().plan;
  std::vector<PathBatch> paths{sample_paths(data.graph, node, plan, seed ^ kEvalStream, 0)};
  Tape<float> tape(false);
  Rng unused(0);
  auto out = model.forward(tape, data.graph, paths, false, unused, true);

  auto label_of = [&](NodeId u) -> std::int64_t {
    return data.labels.task == Task::kSingleLabel ? data.labels.single[u] : -1;
  };
  std::vector<AttentionRecord> records;
  for (std::size_t l = 1; l <= plan.depth(); ++l) {
    const auto& bucket = paths[0].bucket(l);
    const auto& maps = out.attention[l - 1];
    for (std::size_t p = 0; p < bucket.size(); ++p) {
      auto path = bucket.path(p);
      for (std::size_t layer = 0; layer < maps.layers.size(); ++layer) {
        for (std::size_t h = 0; h < maps.heads; ++h) {
          AttentionRecord r;
          r.central = node;
          r.path.assign(path.begin(), path.end());
          r.layer = layer;
          r.head = h;
          r.weights.assign(maps.seq, std::vector<float>(maps.seq));
          for (std::size_t i = 0; i < maps.seq; ++i) {
            for (std::size_t j = 0; j < maps.seq; ++j) r.weights[i][j] = maps.weight(layer, p, h, i, j);
          }
          for (NodeId u : path) r.labels.push_back(label_of(u));
          records.push_back(std::move(r));
        }
      }
    }
  }
  return records;
}

std::size_t dump_attention(const PathSageModel<float>& model, const Dataset& data, NodeId node,
                           std::uint64_t seed, const std::filesystem::path& out_path) {
  auto records = collect_attention(model, data, node, seed);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + out_path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + out_path.string());
  return records.size();
}

std::vector<AttentionRecord> read_attention_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  std::vector<AttentionRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(attention_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord, path.filename().string() + " line " +
                                                   std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

namespace {

struct StatsAccumulator {
  std::size_t records = 0;
  double same_weight = 0.0, diff_weight = 0.0;
  std::size_t same_pairs = 0, diff_pairs = 0;
  double mass = 0.0, uniform_mass = 0.0;
  std::size_t mass_rows = 0;

  void add(const AttentionRecord& r) {
    ++records;
    const std::size_t s = r.path.size();
    for (std::size_t i = 0; i < s; ++i) {
      if (r.labels[i] < 0) continue;
      double row_mass = 0.0;
      std::size_t partners = 0;
      for (std::size_t j = 0; j < s; ++j) {
        if (j == i || r.labels[j] < 0) continue;
        const double w = r.weights[i][j];
        if (r.labels[j] == r.labels[i]) {
          same_weight += w;
          ++same_pairs;
          row_mass += w;
          ++partners;
        } else {
          diff_weight += w;
          ++diff_pairs;
        }
      }
      if (partners > 0) {
        mass += row_mass;
        uniform_mass += static_cast<double>(partners) / static_cast<double>(s);
        ++mass_rows;
      }
    }
  }

  HeadAttentionStats finish(std::size_t layer, std::size_t head) const {
    HeadAttentionStats h;
    h.layer = layer;
    h.head = head;
    h.records = records;
    h.same_pairs = same_pairs;
    h.diff_pairs = diff_pairs;
    h.same_label_mean_weight = same_pairs ? same_weight / static_cast<double>(same_pairs) : 0.0;
    h.diff_label_mean_weight = diff_pairs ? diff_weight / static_cast<double>(diff_pairs) : 0.0;
    h.same_label_mass = mass_rows ? mass / static_cast<double>(mass_rows) : 0.0;
    h.uniform_same_label_mass = mass_rows ? uniform_mass / static_cast<double>(mass_rows) : 0.0;
    return h;
  }
};

json to_json(const HeadAttentionStats& h) {
  return json{{"layer", h.layer},
              {"head", h.head},
              {"records", h.records},
              {"same_label_mean_weight", h.same_label_mean_weight},
              {"diff_label_mean_weight", h.diff_label_mean_weight},
              {"same_label_mass", h.same_label_mass},
              {"uniform_same_label_mass", h.uniform_same_label_mass},
              {"same_pairs", h.same_pairs},
              {"diff_pairs", h.diff_pairs}};
}

}  // namespace

AttentionStats attention_stats(std::span<const AttentionRecord> records) {
  StatsAccumulator overall;
  std::map<std::pair<std::size_t, std::size_t>, StatsAccumulator> per_head;
  for (const auto& r : records) {
    overall.add(r);
    per_head[{r.layer, r.head}].add(r);
  }
  AttentionStats stats;
  stats.records = records.size();
  stats.overall = overall.finish(0, 0);
  for (const auto& [key, acc] : per_head) stats.per_head.push_back(acc.finish(key.first, key.second));
  return stats;
}

json to_json(const AttentionStats& stats) {
  json heads = json::array();
  for (const auto& h : stats.per_head) heads.push_back(to_json(h));
  json overall = to_json(stats.overall);
  overall.erase("layer");
  overall.erase("head");
  return json{{"records", stats.records}, {"overall", overall}, {"heads", heads}};
}

}  // namespace pathsage
