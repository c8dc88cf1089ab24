// SPDX-License-Identifier: Apache-2.0
#include "pathsage/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pathsage/checkpoint.hpp"
#include "pathsage/config.hpp"
#include "pathsage/error.hpp"
#include "pathsage/graph.hpp"
#include "pathsage/metrics.hpp"
#include "pathsage/sampler.hpp"
#include "pathsage/synth.hpp"
#include "pathsage/trainer.hpp"

namespace pathsage {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <typename T>
CLI::Option* optional_flag(CLI::App* app, const std::string& name, std::optional<T>& dst,
                           const std::string& help) {
  return app->add_option_function<T>(name, [&dst](const T& v) { dst = v; }, help);
}

// Flags shared by every subcommand that reads configuration.
void add_config_flags(CLI::App* app, std::string& config_path, ConfigLayer& flags,
                      std::string& counts_text) {
  app->add_option("--config", config_path, "JSON config file");
  optional_flag(app, "--dataset", flags.dataset, "dataset directory");
  optional_flag(app, "--out", flags.out, "output directory");
  optional_flag(app, "--checkpoint", flags.checkpoint, "checkpoint file");
  optional_flag(app, "--seed", flags.seed, "global seed");
  optional_flag(app, "--workers", flags.workers, "worker threads");
  optional_flag(app, "--epochs", flags.epochs, "training epochs");
  optional_flag(app, "--depth", flags.depth, "maximum path length s");
  app->add_option("--counts", counts_text, "paths per length, e.g. 5,5,10");
  optional_flag(app, "--hidden", flags.hidden, "hidden width d");
  optional_flag(app, "--heads", flags.heads, "attention heads");
  optional_flag(app, "--layers", flags.layers, "encoder layers");
  optional_flag(app, "--batch-size", flags.batch_size, "central nodes per batch");
  optional_flag(app, "--lr", flags.lr, "peak learning rate");
  optional_flag(app, "--warmup-ratio", flags.warmup_ratio, "warmup fraction of all steps");
  optional_flag(app, "--patience", flags.patience, "early stopping patience (0 disables)");
  optional_flag(app, "--runs", flags.runs, "evaluation runs");
  optional_flag(app, "--log-interval", flags.log_interval, "epochs between log lines");
  optional_flag(app, "--node", flags.node, "central node");
  optional_flag(app, "--split", flags.split, "train, val or test");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, what);
}

fs::path checkpoint_path(const RunConfig& run) {
  return run.checkpoint.empty() ? fs::path(run.out) / "checkpoint.psck" : fs::path(run.checkpoint);
}

enum class LogLevel { kOff, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("PATHSAGE_LOG");
  if (env == nullptr) return LogLevel::kOff;
  const std::string value(env);
  if (value == "debug") return LogLevel::kDebug;
  if (value == "info") return LogLevel::kInfo;
  return LogLevel::kOff;
}

std::vector<float> parse_feature_row(const std::string& line, std::size_t line_no) {
  std::vector<float> row;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string::npos) end = line.size();
    float v = 0.0f;
    const char* first = line.data() + pos;
    const char* last = line.data() + end;
    while (first < last && *first == ' ') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      throw Error(ErrorCode::kMalformedRecord, "features.csv line " + std::to_string(line_no) +
                                                   ": bad value '" + std::string(first, last) + "'");
    }
    row.push_back(v);
    pos = end + 1;
  }
  return row;
}

FeatureMatrix read_feature_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + file.string());
  FeatureMatrix m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = parse_feature_row(line, line_no);
    if (m.rows == 0) {
      m.cols = row.size();
    } else if (row.size() != m.cols) {
      throw Error(ErrorCode::kMalformedRecord, "features.csv line " + std::to_string(line_no) + ": " +
                                                   std::to_string(row.size()) + " values, expected " +
                                                   std::to_string(m.cols));
    }
    m.data.insert(m.data.end(), row.begin(), row.end());
    ++m.rows;
  }
  return m;
}

// Copies a raw dataset into the canonical layout (features.csv becomes
// features.bin) and loads it back to validate every file.
int cmd_ingest(const RunConfig& run, std::ostream& out) {
  require(!run.dataset.empty(), "ingest needs --dataset (the raw input directory)");
  const fs::path src(run.dataset);
  const fs::path dst(run.out);
  require(fs::absolute(src) != fs::absolute(dst), "ingest --out must differ from --dataset");
  fs::create_directories(dst);
  for (const char* name : {"meta.json", "edges.csv", "labels.csv", "splits.json"}) {
    if (!fs::exists(src / name)) throw Error(ErrorCode::kMissingFile, (src / name).string() + " not found");
    fs::copy_file(src / name, dst / name, fs::copy_options::overwrite_existing);
  }
  if (fs::exists(src / "features.bin")) {
    fs::copy_file(src / "features.bin", dst / "features.bin", fs::copy_options::overwrite_existing);
  } else if (fs::exists(src / "features.csv")) {
    write_features(dst / "features.bin", read_feature_csv(src / "features.csv"));
  } else {
    throw Error(ErrorCode::kMissingFile, "neither features.bin nor features.csv in " + src.string());
  }
  Dataset data = load_dataset(dst);
  out << json{{"dataset", dst.string()},
              {"num_nodes", data.graph.num_nodes()},
              {"num_edges", data.graph.neighbors().size()},
              {"feature_dim", data.graph.features().cols},
              {"num_classes", data.labels.num_classes},
              {"task", std::string(to_string(data.labels.task))},
              {"train", data.splits.train.size()},
              {"val", data.splits.val.size()},
              {"test", data.splits.test.size()}}
             .dump()
      << '\n';
  return kExitOk;
}

int cmd_synth(const SynthOptions& options, const RunConfig& run, std::ostream& out) {
  SynthResult r = synth_planted_khop(options, run.out);
  out << json{{"dataset", run.out},
              {"num_nodes", options.num_nodes},
              {"num_edges", r.edges.size()},
              {"k", options.k},
              {"num_classes", options.num_classes},
              {"seed", options.seed},
              {"attempts", r.attempts}}
             .dump()
      << '\n';
  return kExitOk;
}

int cmd_sample(const RunConfig& run, std::uint64_t epoch, std::ostream& out) {
  require(!run.dataset.empty(), "sample needs --dataset");
  Dataset data = load_dataset(run.dataset);
  PathBatch batch = sample_paths(data.graph, run.node, run.train.plan, run.train.seed, epoch);
  for (const auto& bucket : batch.buckets) {
    for (std::size_t i = 0; i < bucket.size(); ++i) {
      auto path = bucket.path(i);
      out << json{{"length", bucket.length}, {"path", std::vector<NodeId>(path.begin(), path.end())}}.dump()
          << '\n';
    }
  }
  return kExitOk;
}

int cmd_train(const RunConfig& run, bool resume, bool epochs_given, std::ostream& out, std::ostream& err) {
  require(!run.dataset.empty(), "train needs --dataset");
  Dataset data = load_dataset(run.dataset);
  const fs::path ckpt_path = checkpoint_path(run);
  std::unique_ptr<Trainer> trainer;
  if (resume) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (epochs_given) ckpt.config.epochs = run.train.epochs;
    ckpt.config.workers = run.train.workers;
    trainer = std::make_unique<Trainer>(data, std::move(ckpt));
  } else {
    trainer = std::make_unique<Trainer>(data, run.train, run.dataset);
  }
  const LogLevel level = log_level();
  if (level == LogLevel::kDebug) trainer->set_log(&err, true);
  const std::size_t interval = std::max<std::size_t>(run.log_interval, 1);
  FitResult result = trainer->fit([&](const EpochMetrics& m) {
    if (level == LogLevel::kInfo && (m.epoch + 1) % interval == 0) {
      err << json{{"event", "epoch"},
                  {"epoch", m.epoch},
                  {"loss", m.mean_loss},
                  {"train_f1", m.train_f1},
                  {"val_f1", m.val_f1}}
                 .dump()
          << '\n';
    }
  });
  save_checkpoint(trainer->checkpoint(), ckpt_path);
  const auto& progress = trainer->progress();
  out << json{{"checkpoint", ckpt_path.string()},
              {"epochs", progress.epochs_completed},
              {"steps", trainer->optimizer().step},
              {"final_loss", progress.epoch_losses.empty() ? 0.0 : progress.epoch_losses.back()},
              {"best_val_f1", progress.best_val_f1},
              {"stopped_early", result.stopped_early},
              {"crc", checkpoint_crc(ckpt_path)}}
             .dump()
      << '\n';
  return kExitOk;
}

struct Loaded {
  Checkpoint ckpt;
  Dataset data;
};

Loaded load_for_inference(const RunConfig& run) {
  Loaded l{load_checkpoint(checkpoint_path(run)), {}};
  const std::string dataset = run.dataset.empty() ? l.ckpt.dataset : run.dataset;
  require(!dataset.empty(), "no --dataset given and the checkpoint does not record one");
  l.data = load_dataset(dataset);
  l.ckpt.config.workers = run.train.workers;
  return l;
}

int cmd_eval(const RunConfig& run, std::ostream& out) {
  Loaded l = load_for_inference(run);
  EvalReport report = evaluate_runs(l.ckpt.model, l.data, run.split, l.ckpt.config, run.train.seed, run.runs);
  json j = to_json(report);
  j["micro_f1"] = format_mean_std(report.micro_f1_mean, report.micro_f1_std);
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_attn_dump(const RunConfig& run, std::ostream& out) {
  Loaded l = load_for_inference(run);
  fs::path target(run.out);
  if (fs::is_directory(target) || target.extension() != ".jsonl") target /= "attention.jsonl";
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::size_t n = dump_attention(l.ckpt.model, l.data, run.node, run.train.seed, target);
  out << json{{"attention", target.string()}, {"node", run.node}, {"records", n}}.dump() << '\n';
  return kExitOk;
}

int cmd_attn_stats(const std::string& input, std::ostream& out) {
  require(!input.empty(), "attn-stats needs an attention dump file");
  auto records = read_attention_records(input);
  out << to_json(attention_stats(records)).dump() << '\n';
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (kind_of(code)) {
    case ErrorKind::kUsage:
      return kExitUsage;
    case ErrorKind::kNumerical:
      return kExitNumerical;
    case ErrorKind::kData:
      break;
  }
  return kExitData;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Path-based graph transformer for node classification", "pathsage"};
  app.require_subcommand(1);

  std::string config_path, counts_text, attn_input;
  ConfigLayer flags;
  SynthOptions synth;
  std::uint64_t sample_epoch = 0;
  bool resume = false;

  auto* ingest = app.add_subcommand("ingest", "validate raw CSV files and write the dataset layout");
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted k-hop dataset");
  auto* sample = app.add_subcommand("sample", "print the sampled paths of one node as JSON lines");
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint over several seeds");
  auto* attn_dump = app.add_subcommand("attn-dump", "write attention records for one node");
  auto* attn_stats = app.add_subcommand("attn-stats", "summarise an attention dump");

  for (auto* sub : {ingest, synth_cmd, sample, train, eval, attn_dump}) {
    add_config_flags(sub, config_path, flags, counts_text);
  }
  synth_cmd->add_option("--nodes", synth.num_nodes, "number of nodes");
  synth_cmd->add_option("--k", synth.k, "label hop distance");
  synth_cmd->add_option("--classes", synth.num_classes, "number of classes");
  synth_cmd->add_option("--avg-degree", synth.avg_degree, "average degree");
  synth_cmd->add_option("--noise-dims", synth.noise_dims, "Gaussian noise feature columns");
  synth_cmd->add_option("--noise-std", synth.noise_std, "noise standard deviation");
  sample->add_option("--epoch", sample_epoch, "epoch used in seed derivation");
  train->add_flag("--resume", resume, "continue from --checkpoint");
  attn_stats->add_option("input", attn_input, "attention dump (JSON lines)")->required();

  CLI::App* active = &app;
  try {
    app.parse(argc, argv);
    for (auto* sub : app.get_subcommands()) active = sub;
    if (!counts_text.empty()) flags.counts = parse_counts(counts_text);
    ConfigLayer file;
    if (!config_path.empty()) file = read_config_file(config_path);
    RunConfig run = resolve_config(file, flags);
    run.train.validate();

    if (active == ingest) return cmd_ingest(run, out);
    if (active == synth_cmd) {
      synth.seed = run.train.seed;
      return cmd_synth(synth, run, out);
    }
    if (active == sample) return cmd_sample(run, sample_epoch, out);
    if (active == train) return cmd_train(run, resume, file.epochs || flags.epochs, out, err);
    if (active == eval) return cmd_eval(run, out);
    if (active == attn_dump) return cmd_attn_dump(run, out);
    if (active == attn_stats) return cmd_attn_stats(attn_input, out);
    return kExitUsage;
  } catch (const CLI::CallForHelp&) {
    out << active->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    for (auto* sub : app.get_subcommands()) active = sub;
    err << "error: " << e.what() << "\n" << active->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    const int code = exit_code_for(e.code());
    if (code == kExitUsage) err << active->help();
    return code;
  } catch (const json::exception& e) {
    err << "error [MalformedRecord]: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error [IoError]: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace pathsage
