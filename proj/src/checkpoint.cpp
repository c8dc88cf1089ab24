// SPDX-License-Identifier: Apache-2.0
#include "pathsage/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <boost/crc.hpp>
#include <nlohmann/json.hpp>

#include "pathsage/error.hpp"

namespace pathsage {

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'P', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void pod(const T& value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T pod() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw Error(ErrorCode::kMalformedRecord, "checkpoint block overruns the file");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_block(Writer& w, const std::string& name, const Shape& shape, std::span<const float> values) {
  w.pod(static_cast<std::uint32_t>(name.size()));
  w.raw(name.data(), name.size());
  w.pod(static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) w.pod(static_cast<std::uint64_t>(d));
  w.raw(values.data(), values.size() * sizeof(float));
}

struct Block {
  Shape shape;
  std::vector<float> values;
};

json progress_to_json(const TrainingProgress& p) {
  return json{{"epochs_completed", p.epochs_completed},
              {"total_steps", p.total_steps},
              {"best_val_f1", p.best_val_f1},
              {"epochs_since_best", p.epochs_since_best},
              {"stopped_early", p.stopped_early},
              {"epoch_losses", p.epoch_losses}};
}

TrainingProgress progress_from_json(const json& j) {
  TrainingProgress p;
  p.epochs_completed = j.at("epochs_completed").get<std::size_t>();
  p.total_steps = j.at("total_steps").get<std::size_t>();
  p.best_val_f1 = j.at("best_val_f1").get<double>();
  p.epochs_since_best = j.at("epochs_since_best").get<std::size_t>();
  p.stopped_early = j.at("stopped_early").get<bool>();
  p.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
  return p;
}

}  // namespace

std::uint64_t crc64(std::span<const std::uint8_t> bytes) {
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ull, 0xFFFFFFFFFFFFFFFFull, 0xFFFFFFFFFFFFFFFFull, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  json header{{"format", "pathsage-checkpoint"},
              {"train", to_json(ckpt.config)},
              {"model", to_json(ckpt.model.shape())},
              {"dataset", ckpt.dataset},
              {"optimizer_step", ckpt.optimizer.step},
              {"progress", progress_to_json(ckpt.progress)}};
  const std::string text = header.dump();

  Writer w;
  w.raw(kMagic, 4);
  w.pod(kVersion);
  w.pod(static_cast<std::uint64_t>(text.size()));
  w.raw(text.data(), text.size());

  auto params = ckpt.model.parameters();
  const bool with_moments = ckpt.optimizer.m.size() == params.size();
  w.pod(static_cast<std::uint32_t>(params.size() * (with_moments ? 3 : 1)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    write_block(w, p.name, p.tensor.shape(), p.tensor.data());
    if (with_moments) {
      write_block(w, p.name + ".adam_m", p.tensor.shape(), ckpt.optimizer.m[i]);
      write_block(w, p.name + ".adam_v", p.tensor.shape(), ckpt.optimizer.v[i]);
    }
  }
  const std::uint64_t crc = crc64(w.bytes());
  w.pod(crc);
  return std::move(w.bytes());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 4 + 8 + 4 + 8) {
    throw Error(ErrorCode::kChecksumMismatch, "checkpoint truncated (" + std::to_string(bytes.size()) + " bytes)");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kMalformedRecord, "not a checkpoint (bad magic)");
  }
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, sizeof(version));
  if (version != kVersion) {
    throw Error(ErrorCode::kVersionMismatch, "checkpoint version " + std::to_string(version) +
                                                 ", expected " + std::to_string(kVersion));
  }
  auto body = bytes.first(bytes.size() - 8);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
  if (crc64(body) != stored) throw Error(ErrorCode::kChecksumMismatch, "checkpoint CRC does not match");

  Reader r(body);
  r.take(8);
  const auto json_len = r.pod<std::uint64_t>();
  const auto* text = reinterpret_cast<const char*>(r.take(json_len));
  Checkpoint ckpt;
  ModelShape shape;
  std::uint64_t optimizer_step = 0;
  try {
    json header = json::parse(text, text + json_len);
    ckpt.config = train_config_from_json(header.at("train"));
    shape = model_shape_from_json(header.at("model"));
    ckpt.dataset = header.at("dataset").get<std::string>();
    optimizer_step = header.at("optimizer_step").get<std::uint64_t>();
    ckpt.progress = progress_from_json(header.at("progress"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("checkpoint header: ") + e.what());
  }

  std::map<std::string, Block> blocks;
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto name_len = r.pod<std::uint32_t>();
    std::string name(reinterpret_cast<const char*>(r.take(name_len)), name_len);
    Block block;
    const auto rank = r.pod<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) block.shape.push_back(r.pod<std::uint64_t>());
    block.values.resize(numel_of(block.shape));
    std::memcpy(block.values.data(), r.take(block.values.size() * sizeof(float)),
                block.values.size() * sizeof(float));
    blocks.emplace(std::move(name), std::move(block));
  }
  if (!r.done()) throw Error(ErrorCode::kMalformedRecord, "trailing bytes after checkpoint blocks");

  ckpt.model = PathSageModel<float>::init(shape, 0);
  auto params = ckpt.model.parameters();
  ckpt.optimizer = AdamState<float>::for_parameters(params);
  ckpt.optimizer.step = optimizer_step;
  auto fetch = [&blocks](const std::string& name, const Shape& shape) -> const Block& {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw Error(ErrorCode::kMalformedRecord, "checkpoint lacks block " + name);
    if (it->second.shape != shape) {
      throw Error(ErrorCode::kShapeMismatch, name + ": stored " + shape_string(it->second.shape) +
                                                 ", model expects " + shape_string(shape));
    }
    return it->second;
  };
  const bool with_moments = blocks.size() == params.size() * 3;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const Block& values = fetch(p.name, p.tensor.shape());
    std::copy(values.values.begin(), values.values.end(), p.tensor.data().begin());
    if (with_moments) {
      ckpt.optimizer.m[i] = fetch(p.name + ".adam_m", p.tensor.shape()).values;
      ckpt.optimizer.v[i] = fetch(p.name + ".adam_v", p.tensor.shape()).values;
    }
  }
  if (!with_moments && blocks.size() != params.size()) {
    throw Error(ErrorCode::kMalformedRecord, "unexpected number of checkpoint blocks");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  auto bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

std::uint64_t checkpoint_crc(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  if (bytes.size() < 8) throw Error(ErrorCode::kChecksumMismatch, "checkpoint truncated");
  std::uint64_t crc = 0;
  std::memcpy(&crc, bytes.data() + bytes.size() - 8, sizeof(crc));
  return crc;
}

}  // namespace pathsage
