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

// Cluster-quality diagnostics on timestamped data.
//
//   tp = sum over clusters of (|c| - 1)
//   fp = sum over clusters of (|c| - count of the cluster's most common date)
//
// tp counts images absorbed beyond singletons; fp counts absorbed images
// whose date disagrees with the cluster's modal date.

#ifndef WILDSPLIT_QUALITY_H_
#define WILDSPLIT_QUALITY_H_

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wildsplit/cluster.h"
#include "wildsplit/ingest.h"
#include "wildsplit/split.h"

namespace wildsplit {

struct TpFp {
  std::size_t tp = 0;
  std::size_t fp = 0;

  friend bool operator==(const TpFp&, const TpFp&) = default;
};

struct QualityPoint {
  double theta = 0.0;
  std::size_t tp = 0;
  std::optional<std::size_t> fp;  // absent when no dates were supplied
};

// Per-row dates of the table, indexed by RowIndex.
std::vector<std::optional<Date>> DatesOf(const MetadataTable& table);

// Throws NotTimestamped when an image of a non-singleton cluster has no date.
TpFp ComputeTpFp(std::span<const std::vector<RowIndex>> clusters,
                 std::span<const std::optional<Date>> dates);

// min, min+step, ..., max (inclusive, snapped to 1e-12). Throws BadConfig on
// an empty or out-of-range grid.
std::vector<double> MakeThetaGrid(double min, double max, double step);
std::vector<double> DefaultThetaGrid();  // 0.900 .. 1.000 step 0.001

// TP/FP at every grid point, summed over `graphs`. Edges are merged
// incrementally while theta decreases, so the cost is one pass over each
// sorted edge list. With an empty `dates` span only tp is reported. The grid
// must be strictly increasing inside [-1, 1]; points come back in grid order.
std::vector<QualityPoint> ThresholdSweep(std::span<const IdentityGraph> graphs,
                                         std::span<const std::optional<Date>> dates,
                                         std::span<const double> grid);

// Rows: cluster sizes 2, 3, 4, 5, 6+. Columns: unique dates 1..5, 6+.
class PurityTable {
 public:
  static constexpr std::size_t kRows = 5;
  static constexpr std::size_t kCols = 6;

  std::size_t count(std::size_t row, std::size_t col) const { return cells_[row][col]; }
  std::size_t row_total(std::size_t row) const;
  std::size_t total() const;
  bool empty() const { return total() == 0; }
  // cell(row, 1 date) / row total; nullopt for empty rows.
  std::optional<double> single_time_share(std::size_t row) const;

  void Add(std::size_t cluster_size, std::size_t unique_dates);

 private:
  std::array<std::array<std::size_t, kCols>, kRows> cells_{};
};

// Singletons are ignored. Throws NotTimestamped for undated clustered images.
PurityTable BuildPurityTable(std::span<const std::vector<RowIndex>> clusters,
                             std::span<const std::optional<Date>> dates);

struct SideStats {
  std::size_t identities = 0;
  std::size_t images = 0;
  // images-per-identity -> number of identities
  std::map<std::size_t, std::size_t> histogram;
  // Image counts sorted descending (one entry per identity).
  std::vector<std::size_t> counts_desc;
  std::optional<double> single_image_fraction;
  std::optional<double> top1_share;
  std::optional<double> top10_share;
};

struct DatasetStats {
  SideStats train;
  SideStats test;  // test_known and test_new together
};

SideStats ComputeSideStats(std::span<const std::size_t> images_per_identity);
DatasetStats ComputeDatasetStats(const MetadataTable& table,
                                 const SplitAssignment& split);

// Per-dataset helpers shared by the CLI and the server. Dates are used only
// when the dataset is timestamped.
std::vector<IdentityGraph> BuildDatasetGraphs(const MetadataTable& table,
                                              std::string_view dataset,
                                              const EmbeddingMatrix& embeddings,
                                              std::size_t threads = 1);
std::vector<QualityPoint> SweepDataset(const MetadataTable& table,
                                       std::string_view dataset,
                                       std::span<const IdentityGraph> graphs,
                                       std::span<const double> grid);

struct DatasetQuality {
  double theta = 0.0;
  bool timestamped = false;
  std::size_t clusters = 0;  // of size >= 2
  std::size_t clustered_images = 0;
  std::optional<TpFp> tp_fp;  // timestamped datasets only
  std::optional<PurityTable> purity;
};

DatasetQuality QualityAt(const MetadataTable& table, std::string_view dataset,
                         std::span<const IdentityGraph> graphs, double theta);

nlohmann::json PurityToJson(const PurityTable& table);
nlohmann::json QualityToJson(const DatasetQuality& quality);
nlohmann::json StatsToJson(const DatasetStats& stats);
std::string FormatSweepCsv(std::span<const QualityPoint> points);

}  // namespace wildsplit

#endif  // WILDSPLIT_QUALITY_H_
