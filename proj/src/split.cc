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

#include "wildsplit/split.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "wildsplit/error.h"
#include "wildsplit/io.h"
#include "wildsplit/parallel.h"
#include "wildsplit/rng.h"

namespace wildsplit {

namespace {

// Products such as 0.07 * 100 or 0.7 * 90 land a hair off the integer in
// binary floating point; the slack keeps ceil/floor on the intended side.
constexpr double kCountSlack = 1e-9;

}  // namespace

std::string_view LabelName(SplitLabel label) {
  switch (label) {
    case SplitLabel::kTrain: return "train";
    case SplitLabel::kTestKnown: return "test_known";
    case SplitLabel::kTestNew: return "test_new";
  }
  return "?";
}

std::optional<SplitLabel> ParseLabel(std::string_view text) {
  if (text == "train") return SplitLabel::kTrain;
  if (text == "test_known") return SplitLabel::kTestKnown;
  if (text == "test_new") return SplitLabel::kTestNew;
  return std::nullopt;
}

std::string_view ProvenanceName(Provenance p) {
  switch (p) {
    case Provenance::kOpenset: return "openset";
    case Provenance::kTimeAware: return "time_aware";
    case Provenance::kSimilarityCluster: return "similarity_cluster";
    case Provenance::kSimilaritySingleton: return "similarity_singleton";
    case Provenance::kForcedTrain: return "forced_train";
    case Provenance::kRandom: return "random";
    case Provenance::kLoaded: return "loaded";
  }
  return "?";
}

std::vector<IdentityKey> SelectOpensetIdentities(const MetadataTable& table,
                                                 std::string_view dataset,
                                                 const SplitConfig& config) {
  std::vector<IdentityKey> keys = table.identities_of_dataset(dataset);
  const double raw = config.openset_fraction * static_cast<double>(keys.size());
  const std::size_t count = std::min<std::size_t>(
      keys.size(), static_cast<std::size_t>(std::max(0.0, std::ceil(raw - kCountSlack))));
  Rng rng(StreamSeed(config.seed, {"openset", dataset}));
  rng.Shuffle(std::span<IdentityKey>(keys));
  keys.resize(count);
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::size_t TrainTarget(std::size_t n_images, double train_ratio) {
  const double raw = train_ratio * static_cast<double>(n_images);
  const auto target = static_cast<std::size_t>(std::floor(raw + kCountSlack));
  return std::max<std::size_t>(1, std::min(target, n_images));
}

std::vector<LabeledRow> TimeAwareSplit(const MetadataTable& table,
                                       const IdentityKey& key,
                                       const SplitConfig& config) {
  const std::vector<RowIndex>& rows = table.rows_of_identity(key);
  std::map<Date, std::vector<RowIndex>> by_date;
  for (RowIndex row : rows) {
    const auto& date = table[row].date;
    if (!date) {
      throw Error(ErrorCode::kNotTimestamped,
                  "image '" + table[row].image_id + "' of identity '" +
                      key.identity + "' has no date");
    }
    by_date[*date].push_back(row);
  }

  const std::size_t target = TrainTarget(rows.size(), config.train_ratio);
  std::size_t cumulative = 0;
  auto cut = by_date.begin();
  while (cut != by_date.end() && cumulative < target) {
    cumulative += cut->second.size();
    ++cut;
  }

  std::vector<LabeledRow> out;
  out.reserve(rows.size());
  const bool all_train = cut == by_date.end();
  bool train = true;
  for (auto it = by_date.begin(); it != by_date.end(); ++it) {
    if (it == cut) train = false;
    for (RowIndex row : it->second) {
      if (all_train) {
        out.push_back({row, SplitLabel::kTrain, Provenance::kForcedTrain});
      } else {
        out.push_back({row, train ? SplitLabel::kTrain : SplitLabel::kTestKnown,
                       Provenance::kTimeAware});
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const LabeledRow& a, const LabeledRow& b) { return a.row < b.row; });
  return out;
}

std::vector<LabeledRow> SimilarityAwareSplit(const MetadataTable& table,
                                             const ClusterAssignment& clusters,
                                             const SplitConfig& config) {
  const std::vector<RowIndex>& rows = table.rows_of_identity(clusters.key);
  std::vector<RowIndex> covered;
  for (const auto& c : clusters.clusters) covered.insert(covered.end(), c.begin(), c.end());
  std::sort(covered.begin(), covered.end());
  if (covered != rows) {
    throw Error(ErrorCode::kClusterMismatch,
                "clusters do not partition the images of identity '" +
                    clusters.key.identity + "'");
  }

  std::vector<LabeledRow> out;
  out.reserve(rows.size());
  if (rows.size() == 1 || clusters.clusters.size() == 1) {
    for (RowIndex row : rows) {
      out.push_back({row, SplitLabel::kTrain, Provenance::kForcedTrain});
    }
    return out;
  }

  std::vector<RowIndex> singletons;
  std::size_t clustered = 0;
  for (const auto& c : clusters.clusters) {
    if (c.size() >= 2) {
      clustered += c.size();
      for (RowIndex row : c) {
        out.push_back({row, SplitLabel::kTrain, Provenance::kSimilarityCluster});
      }
    } else {
      singletons.push_back(c.front());
    }
  }
  std::sort(singletons.begin(), singletons.end());

  const std::size_t target = TrainTarget(rows.size(), config.train_ratio);
  const std::size_t extra = clustered >= target ? 0 : target - clustered;
  Rng rng(StreamSeed(config.seed, {"singletons", clusters.key.dataset,
                                   clusters.key.identity}));
  rng.Shuffle(std::span<RowIndex>(singletons));
  for (std::size_t k = 0; k < singletons.size(); ++k) {
    out.push_back({singletons[k],
                   k < extra ? SplitLabel::kTrain : SplitLabel::kTestKnown,
                   Provenance::kSimilaritySingleton});
  }
  std::sort(out.begin(), out.end(),
            [](const LabeledRow& a, const LabeledRow& b) { return a.row < b.row; });
  return out;
}

SplitResult BuildSplit(const MetadataTable& table,
                       const EmbeddingMatrix& embeddings,
                       const SplitConfig& config, std::size_t threads) {
  config.Validate();
  if (embeddings.rows() != table.size()) {
    throw Error(ErrorCode::kRowMismatch, "embeddings do not match metadata rows");
  }

  enum class Route { kOpenset, kTime, kSimilarity };
  struct Task {
    IdentityKey key;
    Route route;
  };
  std::vector<Task> tasks;
  for (const std::string& dataset : table.datasets()) {
    const auto openset = SelectOpensetIdentities(table, dataset, config);
    const bool time_split = config.UsesTimeSplit(table, dataset);
    for (IdentityKey& key : table.identities_of_dataset(dataset)) {
      Route route = time_split ? Route::kTime : Route::kSimilarity;
      if (std::binary_search(openset.begin(), openset.end(), key)) {
        route = Route::kOpenset;
      }
      tasks.push_back({std::move(key), route});
    }
  }

  std::vector<std::vector<LabeledRow>> labeled(tasks.size());
  std::vector<std::optional<ClusterAssignment>> clusters(tasks.size());
  ParallelFor(tasks.size(), threads, [&](std::size_t t) {
    const Task& task = tasks[t];
    switch (task.route) {
      case Route::kOpenset:
        for (RowIndex row : table.rows_of_identity(task.key)) {
          labeled[t].push_back({row, SplitLabel::kTestNew, Provenance::kOpenset});
        }
        break;
      case Route::kTime:
        labeled[t] = TimeAwareSplit(table, task.key, config);
        break;
      case Route::kSimilarity:
        clusters[t] = ClusterIdentity(table, task.key, embeddings,
                                      config.ThetaFor(task.key.dataset));
        labeled[t] = SimilarityAwareSplit(table, *clusters[t], config);
        break;
    }
  });

  SplitResult result;
  result.assignment.labels.assign(table.size(), SplitLabel::kTrain);
  result.assignment.provenance.assign(table.size(), Provenance::kForcedTrain);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (const LabeledRow& lr : labeled[t]) {
      result.assignment.labels[lr.row] = lr.label;
      result.assignment.provenance[lr.row] = lr.provenance;
    }
    if (clusters[t]) result.clusters.push_back(std::move(*clusters[t]));
  }
  result.summary = SummarizeSplit(table, result.assignment);
  return result;
}

SplitAssignment RandomSplit(const MetadataTable& table,
                            const SplitAssignment& reference,
                            std::uint64_t seed) {
  if (reference.size() != table.size()) {
    throw Error(ErrorCode::kRowMismatch, "reference split does not match metadata");
  }
  SplitAssignment out = reference;
  for (const IdentityKey& key : table.identities()) {
    std::vector<RowIndex> rows = table.rows_of_identity(key);
    std::size_t n_train = 0;
    bool has_new = false;
    for (RowIndex row : rows) {
      n_train += reference.labels[row] == SplitLabel::kTrain;
      has_new |= reference.labels[row] == SplitLabel::kTestNew;
    }
    if (has_new) continue;
    Rng rng(StreamSeed(seed, {"random", key.dataset, key.identity}));
    rng.Shuffle(std::span<RowIndex>(rows));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out.labels[rows[k]] = k < n_train ? SplitLabel::kTrain : SplitLabel::kTestKnown;
      out.provenance[rows[k]] = Provenance::kRandom;
    }
  }
  return out;
}

std::map<std::string, DatasetSplitSummary> SummarizeSplit(
    const MetadataTable& table, const SplitAssignment& split) {
  std::map<std::string, DatasetSplitSummary> summary;
  for (const std::string& dataset : table.datasets()) {
    DatasetSplitSummary& s = summary[dataset];
    for (const IdentityKey& key : table.identities_of_dataset(dataset)) {
      bool train = false, known = false, fresh = false;
      for (RowIndex row : table.rows_of_identity(key)) {
        switch (split.labels[row]) {
          case SplitLabel::kTrain: ++s.train_images; train = true; break;
          case SplitLabel::kTestKnown: ++s.test_known_images; known = true; break;
          case SplitLabel::kTestNew: ++s.test_new_images; fresh = true; break;
        }
      }
      s.train_identities += train;
      s.test_known_identities += known;
      s.test_new_identities += fresh;
    }
  }
  return summary;
}

ViolationReport VerifySplit(const MetadataTable& table,
                            const EmbeddingMatrix& embeddings,
                            const SplitAssignment& split,
                            const SplitConfig& config, std::size_t threads) {
  if (split.size() != table.size()) {
    throw Error(ErrorCode::kRowMismatch, "split does not match metadata rows");
  }
  if (embeddings.rows() != table.size()) {
    throw Error(ErrorCode::kRowMismatch, "embeddings do not match metadata rows");
  }
  const std::vector<IdentityKey> keys = table.identities();
  std::map<std::string, bool> time_routed;
  for (const std::string& dataset : table.datasets()) {
    time_routed[dataset] = config.UsesTimeSplit(table, dataset);
  }

  std::vector<ViolationReport> partial(keys.size());
  ParallelFor(keys.size(), threads, [&](std::size_t k) {
    const IdentityKey& key = keys[k];
    ViolationReport& r = partial[k];
    const auto& rows = table.rows_of_identity(key);
    std::vector<RowIndex> train, known;
    bool has_new = false;
    for (RowIndex row : rows) {
      switch (split.labels[row]) {
        case SplitLabel::kTrain: train.push_back(row); break;
        case SplitLabel::kTestKnown: known.push_back(row); break;
        case SplitLabel::kTestNew: has_new = true; break;
      }
    }
    const std::string who = key.dataset + "/" + key.identity;
    if (has_new && (!train.empty() || !known.empty())) {
      ++r.openset_contamination;
      r.details.push_back("openset_contamination " + who);
    }
    if (!known.empty() && train.empty()) {
      ++r.orphan_test;
      r.details.push_back("orphan_test " + who);
    }
    if (time_routed.at(key.dataset)) {
      std::set<Date> train_dates;
      for (RowIndex row : train) {
        if (table[row].date) train_dates.insert(*table[row].date);
      }
      for (RowIndex row : known) {
        if (table[row].date && train_dates.count(*table[row].date)) {
          ++r.date_straddle;
          r.details.push_back("date_straddle " + who + " " +
                              table[row].date->ToString());
          break;
        }
      }
    } else {
      const double theta = config.ThetaFor(key.dataset);
      for (RowIndex row : known) {
        for (RowIndex t : train) {
          const double sim = CosineSimilarity(embeddings.row(row), embeddings.row(t));
          if (sim >= theta) {
            ++r.similarity_leakage;
            r.details.push_back("similarity_leakage " + table[row].image_id +
                                " ~ " + table[t].image_id + " sim=" +
                                FormatDouble(sim));
            break;
          }
        }
      }
    }
  });

  ViolationReport report;
  for (ViolationReport& r : partial) {
    report.date_straddle += r.date_straddle;
    report.similarity_leakage += r.similarity_leakage;
    report.openset_contamination += r.openset_contamination;
    report.orphan_test += r.orphan_test;
    for (auto& d : r.details) report.details.push_back(std::move(d));
  }
  return report;
}

std::string FormatSplitFile(const MetadataTable& table,
                            const SplitAssignment& split) {
  std::string out = "image_id,split\n";
  for (RowIndex row = 0; row < table.size(); ++row) {
    out += table[row].image_id;
    out += ',';
    out += LabelName(split.labels[row]);
    out += '\n';
  }
  return out;
}

SplitAssignment ParseSplitFile(const MetadataTable& table, std::string_view text) {
  std::vector<std::string_view> lines = SplitFields(text, '\n');
  for (auto& line : lines) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines[0] != "image_id,split") {
    throw Error(ErrorCode::kBadHeader, "split file header must be 'image_id,split'");
  }
  if (lines.size() - 1 != table.size()) {
    throw Error(ErrorCode::kRowMismatch,
                "split file has " + std::to_string(lines.size() - 1) +
                    " rows, metadata has " + std::to_string(table.size()));
  }
  SplitAssignment split;
  split.labels.resize(table.size());
  split.provenance.assign(table.size(), Provenance::kLoaded);
  for (RowIndex row = 0; row < table.size(); ++row) {
    const auto fields = SplitFields(lines[row + 1], ',');
    if (fields.size() != 2 || fields[0] != table[row].image_id) {
      throw Error(ErrorCode::kBadField,
                  "split row " + std::to_string(row) +
                      " does not match metadata image '" + table[row].image_id + "'");
    }
    const auto label = ParseLabel(fields[1]);
    if (!label) {
      throw Error(ErrorCode::kBadField, "split row " + std::to_string(row) +
                                            ": unknown label '" +
                                            std::string(fields[1]) + "'");
    }
    split.labels[row] = *label;
  }
  return split;
}

nlohmann::json SummaryToJson(
    const std::map<std::string, DatasetSplitSummary>& summary) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [dataset, s] : summary) {
    doc[dataset] = {
        {"train_images", s.train_images},
        {"test_known_images", s.test_known_images},
        {"test_new_images", s.test_new_images},
        {"train_identities", s.train_identities},
        {"test_known_identities", s.test_known_identities},
        {"test_new_identities", s.test_new_identities},
    };
  }
  return doc;
}

nlohmann::json ViolationsToJson(const ViolationReport& report) {
  return {
      {"date_straddle", report.date_straddle},
      {"similarity_leakage", report.similarity_leakage},
      {"openset_contamination", report.openset_contamination},
      {"orphan_test", report.orphan_test},
      {"total", report.total()},
      {"ok", report.ok()},
      {"details", report.details},
  };
}

}  // namespace wildsplit
