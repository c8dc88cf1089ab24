// SPDX-License-Identifier: Apache-2.0
#include "pathsage/graph.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "pathsage/error.hpp"

namespace pathsage {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written as host-order little-endian");

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Task task) {
  return task == Task::kSingleLabel ? "single_label" : "multi_label";
}

Task parse_task(std::string_view text) {
  if (text == "single_label") return Task::kSingleLabel;
  if (text == "multi_label") return Task::kMultiLabel;
  throw Error(ErrorCode::kMalformedRecord, "unknown task '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw Error(ErrorCode::kInvalidConfig, "unknown split '" + std::string(text) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

std::span<const NodeId> Dataset::nodes(Split split) const {
  switch (split) {
    case Split::kTrain: return splits.train;
    case Split::kVal: return splits.val;
    case Split::kTest: return splits.test;
  }
  return {};
}

Graph Graph::from_edges(std::size_t num_nodes, std::span<const Edge> edges,
                        FeatureMatrix features, bool directed) {
  std::vector<std::vector<NodeId>> adjacency(num_nodes);
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "edge (" + std::to_string(u) + "," + std::to_string(v) +
                      ") outside [0," + std::to_string(num_nodes) + ")");
    }
    adjacency[u].push_back(v);
    if (!directed && u != v) adjacency[v].push_back(u);
  }

  Graph g;
  g.directed_ = directed;
  g.features_ = std::move(features);
  g.offsets_.assign(num_nodes + 1, 0);
  for (std::size_t u = 0; u < num_nodes; ++u) {
    auto& list = adjacency[u];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    if (list.empty()) list.push_back(static_cast<NodeId>(u));
    g.offsets_[u + 1] = g.offsets_[u] + list.size();
  }
  g.neighbors_.reserve(g.offsets_.back());
  for (const auto& list : adjacency) {
    g.neighbors_.insert(g.neighbors_.end(), list.begin(), list.end());
  }
  return g;
}

std::span<const NodeId> Graph::neighbors_of(NodeId u) const {
  if (u >= num_nodes()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "node " + std::to_string(u) + " >= " + std::to_string(num_nodes()));
  }
  return {neighbors_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto row = neighbors_of(u);
  return std::binary_search(row.begin(), row.end(), v);
}

namespace {

std::ifstream open_input(const fs::path& file, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(file, mode);
  if (!in) throw Error(ErrorCode::kMissingFile, file.string());
  return in;
}

std::ofstream open_output(const fs::path& file, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(file, mode | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + file.string());
  return out;
}

json read_json(const fs::path& file) {
  auto in = open_input(file);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, file.filename().string() + ": " + e.what());
  }
}

[[noreturn]] void malformed(const fs::path& file, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kMalformedRecord,
              file.filename().string() + " line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  text = trim(text);
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

DatasetMeta read_meta(const fs::path& file) {
  json j = read_json(file);
  DatasetMeta meta;
  try {
    meta.num_nodes = j.at("num_nodes").get<std::uint64_t>();
    meta.feature_dim = j.at("feature_dim").get<std::uint64_t>();
    meta.num_classes = j.at("num_classes").get<std::uint64_t>();
    meta.task = parse_task(j.at("task").get<std::string>());
    meta.directed = j.value("directed", false);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, "meta.json: " + std::string(e.what()));
  }
  if (meta.num_nodes == 0) throw Error(ErrorCode::kMalformedRecord, "meta.json: num_nodes is 0");
  if (meta.num_classes == 0) throw Error(ErrorCode::kMalformedRecord, "meta.json: num_classes is 0");
  if (meta.num_nodes > std::uint64_t{0xFFFFFFFF}) {
    throw Error(ErrorCode::kMalformedRecord, "meta.json: num_nodes exceeds 32-bit node ids");
  }
  return meta;
}

std::vector<Edge> read_edges(const fs::path& file, std::size_t num_nodes) {
  auto in = open_input(file);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    auto comma = view.find(',');
    std::uint64_t src = 0, dst = 0;
    if (comma == std::string_view::npos || !parse_int(view.substr(0, comma), src) ||
        !parse_int(view.substr(comma + 1), dst)) {
      malformed(file, lineno, "expected 'src,dst'");
    }
    if (src >= num_nodes || dst >= num_nodes) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "edges.csv line " + std::to_string(lineno) + ": node index >= " +
                      std::to_string(num_nodes));
    }
    edges.emplace_back(static_cast<NodeId>(src), static_cast<NodeId>(dst));
  }
  return edges;
}

LabelSet read_labels(const fs::path& file, const DatasetMeta& meta) {
  auto in = open_input(file);
  LabelSet labels;
  labels.task = meta.task;
  labels.num_classes = meta.num_classes;
  std::vector<bool> seen(meta.num_nodes, false);
  if (meta.task == Task::kSingleLabel) {
    labels.single.assign(meta.num_nodes, 0);
  } else {
    labels.multi.assign(meta.num_nodes * meta.num_classes, 0);
  }

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    auto comma = view.find(',');
    std::uint64_t node = 0;
    if (comma == std::string_view::npos || !parse_int(view.substr(0, comma), node)) {
      malformed(file, lineno, "expected 'node,label'");
    }
    if (node >= meta.num_nodes) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "labels.csv line " + std::to_string(lineno) + ": node " + std::to_string(node));
    }
    if (seen[node]) malformed(file, lineno, "duplicate label for node " + std::to_string(node));
    seen[node] = true;

    std::string_view rest = trim(view.substr(comma + 1));
    auto check_class = [&](std::uint64_t c) {
      if (c >= meta.num_classes) {
        throw Error(ErrorCode::kIndexOutOfRange, "labels.csv line " + std::to_string(lineno) +
                                                     ": class " + std::to_string(c) +
                                                     " >= num_classes");
      }
    };
    if (meta.task == Task::kSingleLabel) {
      std::uint64_t c = 0;
      if (!parse_int(rest, c)) malformed(file, lineno, "expected integer label");
      check_class(c);
      labels.single[node] = static_cast<std::int32_t>(c);
    } else {
      while (!rest.empty()) {
        auto semi = rest.find(';');
        std::string_view item = rest.substr(0, semi);
        std::uint64_t c = 0;
        if (!parse_int(item, c)) malformed(file, lineno, "expected ';'-separated label indices");
        check_class(c);
        labels.multi[node * meta.num_classes + c] = 1;
        if (semi == std::string_view::npos) break;
        rest = rest.substr(semi + 1);
      }
    }
  }
  for (std::size_t u = 0; u < seen.size(); ++u) {
    if (!seen[u]) {
      throw Error(ErrorCode::kMalformedRecord, "labels.csv: no label for node " + std::to_string(u));
    }
  }
  return labels;
}

SplitMasks read_splits(const fs::path& file, std::size_t num_nodes) {
  json j = read_json(file);
  SplitMasks splits;
  std::vector<std::uint8_t> owner(num_nodes, 0);
  auto read_one = [&](const char* key, std::vector<NodeId>& out, std::uint8_t tag) {
    if (!j.contains(key)) return;
    for (const auto& item : j.at(key)) {
      if (!item.is_number_unsigned() && !(item.is_number_integer() && item.get<std::int64_t>() >= 0)) {
        throw Error(ErrorCode::kMalformedRecord, std::string("splits.json: non-index entry in ") + key);
      }
      auto u = item.get<std::uint64_t>();
      if (u >= num_nodes) {
        throw Error(ErrorCode::kIndexOutOfRange,
                    std::string("splits.json: ") + key + " contains " + std::to_string(u));
      }
      if (owner[u] != 0) {
        throw Error(ErrorCode::kSplitOverlap, "node " + std::to_string(u) + " appears in more than one split entry");
      }
      owner[u] = tag;
      out.push_back(static_cast<NodeId>(u));
    }
  };
  try {
    read_one("train", splits.train, 1);
    read_one("val", splits.val, 2);
    read_one("test", splits.test, 3);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, "splits.json: " + std::string(e.what()));
  }
  if (splits.train.empty()) throw Error(ErrorCode::kEmptySplit, "splits.json: train split is empty");
  return splits;
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& in, T& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

constexpr char kFeatureMagic[4] = {'P', 'S', 'G', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

}  // namespace

FeatureMatrix read_features(const fs::path& file) {
  auto in = open_input(file, std::ios::binary);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  if (!in.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw Error(ErrorCode::kMalformedRecord, "features.bin: bad magic");
  }
  if (!read_pod(in, version)) throw Error(ErrorCode::kMalformedRecord, "features.bin: truncated header");
  if (version != kFeatureVersion) {
    throw Error(ErrorCode::kVersionMismatch, "features.bin: version " + std::to_string(version));
  }
  if (!read_pod(in, rows) || !read_pod(in, cols)) {
    throw Error(ErrorCode::kMalformedRecord, "features.bin: truncated header");
  }
  FeatureMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.data.resize(rows * cols);
  if (!in.read(reinterpret_cast<char*>(m.data.data()),
               static_cast<std::streamsize>(m.data.size() * sizeof(float)))) {
    throw Error(ErrorCode::kMalformedRecord, "features.bin: truncated payload");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kMalformedRecord, "features.bin: trailing bytes");
  }
  return m;
}

void write_features(const fs::path& file, const FeatureMatrix& features) {
  auto out = open_output(file, std::ios::binary);
  out.write(kFeatureMagic, 4);
  write_pod(out, kFeatureVersion);
  write_pod(out, static_cast<std::uint64_t>(features.rows));
  write_pod(out, static_cast<std::uint64_t>(features.cols));
  out.write(reinterpret_cast<const char*>(features.data.data()),
            static_cast<std::streamsize>(features.data.size() * sizeof(float)));
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + file.string());
}

void write_meta(const fs::path& file, const DatasetMeta& meta) {
  json j = {{"num_nodes", meta.num_nodes},
            {"feature_dim", meta.feature_dim},
            {"num_classes", meta.num_classes},
            {"task", std::string(to_string(meta.task))},
            {"directed", meta.directed}};
  auto out = open_output(file);
  out << j.dump() << '\n';
}

void write_edges(const fs::path& file, std::span<const Edge> edges) {
  auto out = open_output(file);
  for (const auto& [u, v] : edges) out << u << ',' << v << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + file.string());
}

void write_labels(const fs::path& file, const LabelSet& labels) {
  auto out = open_output(file);
  if (labels.task == Task::kSingleLabel) {
    for (std::size_t u = 0; u < labels.single.size(); ++u) out << u << ',' << labels.single[u] << '\n';
  } else {
    std::size_t n = labels.num_classes == 0 ? 0 : labels.multi.size() / labels.num_classes;
    for (std::size_t u = 0; u < n; ++u) {
      out << u << ',';
      bool first = true;
      for (std::size_t c = 0; c < labels.num_classes; ++c) {
        if (labels.multi[u * labels.num_classes + c] == 0) continue;
        if (!first) out << ';';
        out << c;
        first = false;
      }
      out << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + file.string());
}

void write_splits(const fs::path& file, const SplitMasks& splits) {
  json j = {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}};
  auto out = open_output(file);
  out << j.dump() << '\n';
}

Dataset load_dataset(const fs::path& dir) {
  for (const char* name : {"meta.json", "edges.csv", "features.bin", "labels.csv", "splits.json"}) {
    if (!fs::exists(dir / name)) throw Error(ErrorCode::kMissingFile, (dir / name).string());
  }
  DatasetMeta meta = read_meta(dir / "meta.json");
  auto edges = read_edges(dir / "edges.csv", meta.num_nodes);
  FeatureMatrix features = read_features(dir / "features.bin");
  if (features.rows != meta.num_nodes) {
    throw Error(ErrorCode::kDimensionMismatch, "features.bin has " + std::to_string(features.rows) +
                                                   " rows, expected " + std::to_string(meta.num_nodes));
  }
  if (features.cols != meta.feature_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "features.bin has " + std::to_string(features.cols) +
                                                   " cols, expected " + std::to_string(meta.feature_dim));
  }
  Dataset ds;
  ds.graph = Graph::from_edges(meta.num_nodes, edges, std::move(features), meta.directed);
  ds.labels = read_labels(dir / "labels.csv", meta);
  ds.splits = read_splits(dir / "splits.json", meta.num_nodes);
  return ds;
}

}  // namespace pathsage
