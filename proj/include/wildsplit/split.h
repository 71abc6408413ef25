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

// Leakage-free train/test split construction.
//
// Per dataset:
//   1. A seeded ~5% of identities become open-set identities; all their
//      images are test_new.
//   2. Timestamped datasets: each remaining identity is cut at a date so that
//      the oldest ~train_ratio of its images are train and no date is shared
//      between train and test.
//   3. Other datasets: the identity's images are clustered at the dataset's
//      theta; every non-singleton cluster goes to train and singletons fill
//      the remaining train quota at random, the rest become test_known.

#ifndef WILDSPLIT_SPLIT_H_
#define WILDSPLIT_SPLIT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wildsplit/cluster.h"
#include "wildsplit/config.h"
#include "wildsplit/ingest.h"

namespace wildsplit {

enum class SplitLabel : std::uint8_t { kTrain, kTestKnown, kTestNew };

enum class Provenance : std::uint8_t {
  kOpenset,
  kTimeAware,
  kSimilarityCluster,
  kSimilaritySingleton,
  kForcedTrain,
  kRandom,  // produced by RandomSplit
  kLoaded,  // read back from a split file
};

std::string_view LabelName(SplitLabel label);
std::optional<SplitLabel> ParseLabel(std::string_view text);
std::string_view ProvenanceName(Provenance p);

struct LabeledRow {
  RowIndex row = 0;
  SplitLabel label = SplitLabel::kTrain;
  Provenance provenance = Provenance::kForcedTrain;
};

struct SplitAssignment {
  std::vector<SplitLabel> labels;
  std::vector<Provenance> provenance;

  std::size_t size() const { return labels.size(); }
};

struct DatasetSplitSummary {
  std::size_t train_images = 0;
  std::size_t test_known_images = 0;
  std::size_t test_new_images = 0;
  std::size_t train_identities = 0;
  std::size_t test_known_identities = 0;
  std::size_t test_new_identities = 0;

  friend bool operator==(const DatasetSplitSummary&, const DatasetSplitSummary&) = default;
};

struct SplitResult {
  SplitAssignment assignment;
  std::map<std::string, DatasetSplitSummary> summary;
  // Clusters of the similarity-routed identities, in identity-key order.
  std::vector<ClusterAssignment> clusters;
};

// ceil(fraction * n_identities) identities, picked by a seeded shuffle of the
// sorted identity keys. Returned in ascending key order.
std::vector<IdentityKey> SelectOpensetIdentities(const MetadataTable& table,
                                                 std::string_view dataset,
                                                 const SplitConfig& config);

// max(1, floor(ratio * n)).
std::size_t TrainTarget(std::size_t n_images, double train_ratio);

// Labels for every image of `key` by the date-prefix rule. Throws
// NotTimestamped if any image lacks a date.
std::vector<LabeledRow> TimeAwareSplit(const MetadataTable& table,
                                       const IdentityKey& key,
                                       const SplitConfig& config);

// Labels for every image of `clusters.key`. Throws ClusterMismatch if the
// clusters do not partition the identity's rows.
std::vector<LabeledRow> SimilarityAwareSplit(const MetadataTable& table,
                                             const ClusterAssignment& clusters,
                                             const SplitConfig& config);

SplitResult BuildSplit(const MetadataTable& table,
                       const EmbeddingMatrix& embeddings,
                       const SplitConfig& config, std::size_t threads = 1);

// Same per-identity label counts as `reference`, drawn uniformly at random.
// test_new identities are left untouched.
SplitAssignment RandomSplit(const MetadataTable& table,
                            const SplitAssignment& reference,
                            std::uint64_t seed);

std::map<std::string, DatasetSplitSummary> SummarizeSplit(
    const MetadataTable& table, const SplitAssignment& split);

struct ViolationReport {
  std::size_t date_straddle = 0;          // identities sharing a date across sides
  std::size_t similarity_leakage = 0;     // test_known images with a train twin
  std::size_t openset_contamination = 0;  // test_new identities with other labels
  std::size_t orphan_test = 0;            // test_known identities without train
  std::vector<std::string> details;

  std::size_t total() const {
    return date_straddle + similarity_leakage + openset_contamination +
           orphan_test;
  }
  bool ok() const { return total() == 0; }
};

// Checks the four leakage invariants. Date straddling is checked for
// time-routed datasets, similarity leakage for the others (at the dataset's
// theta).
ViolationReport VerifySplit(const MetadataTable& table,
                            const EmbeddingMatrix& embeddings,
                            const SplitAssignment& split,
                            const SplitConfig& config, std::size_t threads = 1);

// `image_id,split` in metadata order.
std::string FormatSplitFile(const MetadataTable& table,
                            const SplitAssignment& split);
SplitAssignment ParseSplitFile(const MetadataTable& table, std::string_view text);

nlohmann::json SummaryToJson(
    const std::map<std::string, DatasetSplitSummary>& summary);
nlohmann::json ViolationsToJson(const ViolationReport& report);

}  // namespace wildsplit

#endif  // WILDSPLIT_SPLIT_H_
