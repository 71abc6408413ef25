// Copyright 2026 The Wildsplit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wildsplit/cli.h"

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "wildsplit/cluster.h"
#include "wildsplit/config.h"
#include "wildsplit/error.h"
#include "wildsplit/evalkit.h"
#include "wildsplit/ingest.h"
#include "wildsplit/io.h"
#include "wildsplit/manifest.h"
#include "wildsplit/parallel.h"
#include "wildsplit/quality.h"
#include "wildsplit/serve.h"
#include "wildsplit/split.h"
#include "wildsplit/synth.h"

namespace wildsplit {

namespace {

namespace fs = std::filesystem;

// Union of all flags; each subcommand registers the ones it reads.
struct Options {
  std::string metadata;
  std::string embeddings;
  std::string logits;
  std::string classes;
  std::string config;
  std::string split;
  std::string clusters;
  std::string dataset;
  std::string out;
  std::string scorer = "knn";
  std::string static_dir;
  std::optional<double> theta;
  double theta_min = 0.90;
  double theta_max = 1.00;
  double theta_step = 0.001;
  std::optional<double> t_new;
  std::optional<std::uint64_t> seed;
  std::size_t threads = DefaultThreads();
  int port = 8787;
};

fs::path WithSuffix(const fs::path& path, const char* suffix) {
  fs::path out = path;
  out += suffix;
  return out;
}

// Config file first, then flag overrides.
SplitConfig ResolveConfig(const Options& o) {
  SplitConfig config = o.config.empty() ? SplitConfig{} : LoadSplitConfig(o.config);
  if (o.seed) config.seed = *o.seed;
  if (o.theta) config.default_theta = *o.theta;
  config.Validate();
  return config;
}

// Writes `text` to --out, or to `out` when no path was given.
void Emit(const Options& o, std::ostream& out, const std::string& text) {
  if (o.out.empty()) {
    out << text;
  } else {
    WriteFileAtomic(o.out, text);
  }
}

void RequireDataset(const MetadataTable& table, const std::string& dataset) {
  if (!table.has_dataset(dataset)) {
    throw Error(ErrorCode::kUnknownDataset, "unknown dataset '" + dataset + "'");
  }
}

int CmdSplit(const Options& o, std::ostream&) {
  const SplitConfig config = ResolveConfig(o);
  const MetadataTable table = LoadMetadata(o.metadata);
  const EmbeddingMatrix emb = LoadEmbeddings(o.embeddings, table.size());
  const SplitResult result = BuildSplit(table, emb, config, o.threads);

  const fs::path out = o.out;
  const fs::path summary = WithSuffix(out, ".summary.json");
  WriteFileAtomic(out, FormatSplitFile(table, result.assignment));
  WriteFileAtomic(summary, SummaryToJson(result.summary).dump(2) + "\n");

  RunManifest manifest("split");
  manifest.set_config(ToJson(config));
  manifest.set_seed(config.seed);
  manifest.AddInput("metadata", o.metadata);
  manifest.AddInput("embeddings", o.embeddings);
  if (!o.config.empty()) manifest.AddInput("config", o.config);
  manifest.AddOutput("split", out);
  manifest.AddOutput("summary", summary);
  if (!o.clusters.empty()) {
    WriteFileAtomic(o.clusters, FormatClusterFile(table, result.clusters));
    manifest.AddOutput("clusters", o.clusters);
  }
  manifest.Write(WithSuffix(out, ".manifest.json"));
  return 0;
}

int CmdRandomSplit(const Options& o, std::ostream&) {
  const MetadataTable table = LoadMetadata(o.metadata);
  const SplitAssignment reference = ParseSplitFile(table, ReadTextFile(o.split));
  const std::uint64_t seed = o.seed.value_or(0);
  const SplitAssignment random = RandomSplit(table, reference, seed);
  WriteFileAtomic(o.out, FormatSplitFile(table, random));

  RunManifest manifest("random-split");
  manifest.set_seed(seed);
  manifest.AddInput("metadata", o.metadata);
  manifest.AddInput("split", o.split);
  manifest.AddOutput("split", o.out);
  manifest.Write(WithSuffix(o.out, ".manifest.json"));
  return 0;
}

int CmdCluster(const Options& o, std::ostream&) {
  const SplitConfig config = ResolveConfig(o);
  const MetadataTable table = LoadMetadata(o.metadata);
  const EmbeddingMatrix emb = LoadEmbeddings(o.embeddings, table.size());
  std::vector<std::string> datasets = table.datasets();
  if (!o.dataset.empty()) {
    RequireDataset(table, o.dataset);
    datasets = {o.dataset};
  }
  std::vector<ClusterAssignment> all;
  for (const std::string& dataset : datasets) {
    auto part = ClusterDataset(table, dataset, emb, config, o.threads);
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  WriteFileAtomic(o.out, FormatClusterFile(table, all));

  RunManifest manifest("cluster");
  manifest.set_config(ToJson(config));
  manifest.set_seed(config.seed);
  manifest.AddInput("metadata", o.metadata);
  manifest.AddInput("embeddings", o.embeddings);
  if (!o.config.empty()) manifest.AddInput("config", o.config);
  manifest.AddOutput("clusters", o.out);
  manifest.Write(WithSuffix(o.out, ".manifest.json"));
  return 0;
}

int CmdSweep(const Options& o, std::ostream& out) {
  const MetadataTable table = LoadMetadata(o.metadata);
  RequireDataset(table, o.dataset);
  const EmbeddingMatrix emb = LoadEmbeddings(o.embeddings, table.size());
  const auto grid = MakeThetaGrid(o.theta_min, o.theta_max, o.theta_step);
  const auto graphs = BuildDatasetGraphs(table, o.dataset, emb, o.threads);
  Emit(o, out, FormatSweepCsv(SweepDataset(table, o.dataset, graphs, grid)));
  return 0;
}

int CmdQuality(const Options& o, std::ostream& out) {
  const SplitConfig config = ResolveConfig(o);
  const MetadataTable table = LoadMetadata(o.metadata);
  RequireDataset(table, o.dataset);
  const EmbeddingMatrix emb = LoadEmbeddings(o.embeddings, table.size());
  const auto graphs = BuildDatasetGraphs(table, o.dataset, emb, o.threads);
  nlohmann::json doc = QualityToJson(
      QualityAt(table, o.dataset, graphs, config.ThetaFor(o.dataset)));
  doc["dataset"] = o.dataset;
  Emit(o, out, doc.dump(2) + "\n");
  return 0;
}

int CmdEval(const Options& o, std::ostream& out) {
  const auto scorer = ParseScorer(o.scorer);
  if (!scorer) throw Error(ErrorCode::kBadConfig, "unknown scorer '" + o.scorer + "'");
  const MetadataTable table = LoadMetadata(o.metadata);
  const SplitAssignment split = ParseSplitFile(table, ReadTextFile(o.split));

  RunManifest manifest("eval");
  manifest.AddInput("metadata", o.metadata);
  manifest.AddInput("split", o.split);
  std::optional<EmbeddingMatrix> emb;
  std::optional<LogitTable> logits;
  if (*scorer == Scorer::kKnn || *scorer == Scorer::kNms) {
    if (o.embeddings.empty()) {
      throw Error(ErrorCode::kBadConfig, "scorer " + o.scorer + " needs --embeddings");
    }
    emb = LoadEmbeddings(o.embeddings, table.size());
    manifest.AddInput("embeddings", o.embeddings);
  } else {
    if (o.logits.empty() || o.classes.empty()) {
      throw Error(ErrorCode::kBadConfig, "scorer " + o.scorer + " needs --logits and --classes");
    }
    logits = LoadLogits(o.logits, o.classes, table.size());
    manifest.AddInput("logits", o.logits);
    manifest.AddInput("classes", o.classes);
  }
  const auto scored = ScoreTestImages(table, split, *scorer, emb ? &*emb : nullptr,
                                      logits ? &*logits : nullptr, o.threads);
  const MetricReport report =
      Evaluate(scored, table, split, o.t_new, std::string(ScorerName(*scorer)));
  const std::string text = ReportToJson(report).dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
    return 0;
  }
  WriteFileAtomic(o.out, text);
  manifest.set_config({{"scorer", ScorerName(*scorer)},
                       {"t_new", o.t_new ? nlohmann::json(*o.t_new) : nlohmann::json(nullptr)}});
  manifest.AddOutput("report", o.out);
  manifest.Write(WithSuffix(o.out, ".manifest.json"));
  return 0;
}

int CmdStats(const Options& o, std::ostream& out) {
  const MetadataTable table = LoadMetadata(o.metadata);
  const SplitAssignment split = ParseSplitFile(table, ReadTextFile(o.split));
  nlohmann::json datasets = nlohmann::json::object();
  for (const std::string& dataset : table.datasets()) {
    std::vector<std::size_t> train, test;
    for (const IdentityKey& key : table.identities_of_dataset(dataset)) {
      std::size_t n_train = 0, n_test = 0;
      for (RowIndex row : table.rows_of_identity(key)) {
        (split.labels[row] == SplitLabel::kTrain ? n_train : n_test) += 1;
      }
      train.push_back(n_train);
      test.push_back(n_test);
    }
    datasets[dataset] =
        StatsToJson(DatasetStats{ComputeSideStats(train), ComputeSideStats(test)});
  }
  const nlohmann::json doc = {{"all", StatsToJson(ComputeDatasetStats(table, split))},
                              {"datasets", datasets}};
  Emit(o, out, doc.dump(2) + "\n");
  return 0;
}

int CmdSynth(const Options& o, std::ostream&) {
  WorldSpec spec;
  if (!o.config.empty()) spec = WorldSpecFromJson(nlohmann::json::parse(ReadTextFile(o.config)));
  if (o.seed) spec.seed = *o.seed;
  const WorldTruth world = GenerateWorld(spec);
  const fs::path dir = o.out;
  WriteWorld(dir, world);

  RunManifest manifest("synth");
  manifest.set_config(WorldSpecToJson(spec));
  manifest.set_seed(spec.seed);
  if (!o.config.empty()) manifest.AddInput("config", o.config);
  manifest.AddOutput("metadata", dir / "metadata.csv");
  manifest.AddOutput("embeddings", dir / "embeddings.emb1");
  manifest.AddOutput("truth", dir / "truth.json");
  manifest.Write(dir / "manifest.json");
  return 0;
}

int CmdVerify(const Options& o, std::ostream& out) {
  const SplitConfig config = ResolveConfig(o);
  const MetadataTable table = LoadMetadata(o.metadata);
  const EmbeddingMatrix emb = LoadEmbeddings(o.embeddings, table.size());
  const SplitAssignment split = ParseSplitFile(table, ReadTextFile(o.split));
  const ViolationReport report = VerifySplit(table, emb, split, config, o.threads);
  Emit(o, out, ViolationsToJson(report).dump(2) + "\n");
  return report.ok() ? 0 : 1;
}

int CmdServe(const Options& o, std::ostream& out) {
  MetadataTable table = LoadMetadata(o.metadata);
  EmbeddingMatrix emb = LoadEmbeddings(o.embeddings, table.size());
  Session session(std::move(table), std::move(emb), o.config, o.threads);
  ServeOptions options;
  options.port = o.port;
  if (!o.static_dir.empty()) options.static_dir = o.static_dir;
  out << "serving on http://" << options.host << ":" << options.port << std::endl;
  if (!Serve(session, options)) {
    throw Error(ErrorCode::kIo, "cannot listen on port " + std::to_string(o.port));
  }
  return 0;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Leakage-free train/test splits and open-set evaluation for animal re-identification"};
  app.set_version_flag("--version", ToolVersion());
  app.require_subcommand(1);

  Options o;
  std::function<int(const Options&, std::ostream&)> run;

  auto metadata = [&](CLI::App* cmd) {
    cmd->add_option("--metadata", o.metadata, "Metadata CSV")->required()->check(CLI::ExistingFile);
  };
  auto embeddings = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--embeddings", o.embeddings, "EMB1 embeddings")
                    ->check(CLI::ExistingFile);
    if (required) opt->required();
  };
  auto config = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "Split config JSON")->check(CLI::ExistingFile);
  };
  auto split = [&](CLI::App* cmd) {
    cmd->add_option("--split", o.split, "Split CSV")->required()->check(CLI::ExistingFile);
  };
  auto theta = [&](CLI::App* cmd) {
    cmd->add_option("--theta", o.theta, "Default similarity threshold")
        ->check(CLI::Range(-1.0, 1.0));
  };
  auto threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto out_flag = [&](CLI::App* cmd, bool required, const char* help) {
    auto* opt = cmd->add_option("--out", o.out, help);
    if (required) opt->required();
  };
  auto seed = [&](CLI::App* cmd) { cmd->add_option("--seed", o.seed, "Random seed"); };
  auto dataset = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--dataset", o.dataset, "Dataset name");
    if (required) opt->required();
  };
  auto bind = [&](CLI::App* cmd, int (*fn)(const Options&, std::ostream&)) {
    cmd->callback([&run, fn] { run = fn; });
  };

  auto* c = app.add_subcommand("split", "Build a leakage-free split");
  metadata(c), embeddings(c, true), config(c), seed(c), theta(c), threads(c);
  out_flag(c, true, "Split CSV; summary and manifest are written next to it");
  c->add_option("--clusters", o.clusters, "Also write the cluster file here");
  bind(c, CmdSplit);

  c = app.add_subcommand("random-split", "Shuffle a split keeping per-identity counts");
  metadata(c), split(c), seed(c), out_flag(c, true, "Split CSV");
  bind(c, CmdRandomSplit);

  c = app.add_subcommand("cluster", "Cluster the images of every identity");
  metadata(c), embeddings(c, true), config(c), theta(c), dataset(c, false), threads(c);
  out_flag(c, true, "Cluster CSV");
  bind(c, CmdCluster);

  c = app.add_subcommand("sweep", "TP/FP over a threshold grid");
  metadata(c), embeddings(c, true), dataset(c, true), threads(c);
  c->add_option("--theta-min", o.theta_min, "Grid start");
  c->add_option("--theta-max", o.theta_max, "Grid end (inclusive)");
  c->add_option("--theta-step", o.theta_step, "Grid step");
  out_flag(c, false, "CSV path (default stdout)");
  bind(c, CmdSweep);

  c = app.add_subcommand("quality", "TP/FP and purity table at one threshold");
  metadata(c), embeddings(c, true), config(c), theta(c), dataset(c, true), threads(c);
  out_flag(c, false, "JSON path (default stdout)");
  bind(c, CmdQuality);

  c = app.add_subcommand("eval", "Closed- and open-set metrics of a scorer");
  metadata(c), split(c), embeddings(c, false), threads(c);
  c->add_option("--logits", o.logits, "EMB1 logits")->check(CLI::ExistingFile);
  c->add_option("--classes", o.classes, "Logit class JSON")->check(CLI::ExistingFile);
  c->add_option("--scorer", o.scorer, "knn, nms, msp or mls")
      ->check(CLI::IsMember({"knn", "nms", "msp", "mls"}));
  c->add_option("--t-new", o.t_new, "Open-set threshold");
  out_flag(c, false, "Report JSON (default stdout)");
  bind(c, CmdEval);

  c = app.add_subcommand("stats", "Images-per-identity statistics of a split");
  metadata(c), split(c), out_flag(c, false, "JSON path (default stdout)");
  bind(c, CmdStats);

  c = app.add_subcommand("synth", "Generate a synthetic world");
  c->add_option("--config", o.config, "World spec JSON")->check(CLI::ExistingFile);
  seed(c), out_flag(c, true, "Output directory");
  bind(c, CmdSynth);

  c = app.add_subcommand("verify", "Check a split for leakage; exit 1 on violations");
  metadata(c), embeddings(c, true), split(c), config(c), theta(c), threads(c);
  out_flag(c, false, "Report JSON (default stdout)");
  bind(c, CmdVerify);

  c = app.add_subcommand("serve", "HTTP API for threshold tuning");
  metadata(c), embeddings(c, true), threads(c);
  c->add_option("--config", o.config, "Config JSON to persist thresholds into")->required();
  c->add_option("--port", o.port, "Port")->check(CLI::Range(1, 65535));
  c->add_option("--static", o.static_dir, "Workbench bundle directory")
      ->check(CLI::ExistingDirectory);
  bind(c, CmdServe);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);  // --help, --version
    err << "usage error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    return run(o, out);
  } catch (const Error& e) {
    err << "error: code=" << ErrorCodeName(e.code()) << " " << e.what() << "\n";
  } catch (const nlohmann::json::exception& e) {
    err << "error: code=BadField " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: code=Internal " << e.what() << "\n";
  }
  return 1;
}

int RunCli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return RunCli(args, std::cout, std::cerr);
}

}  // namespace wildsplit
