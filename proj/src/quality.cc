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

#include "wildsplit/quality.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "wildsplit/error.h"
#include "wildsplit/io.h"
#include "wildsplit/parallel.h"
#include "wildsplit/union_find.h"

namespace wildsplit {

namespace {

const Date& RequireDate(std::span<const std::optional<Date>> dates, RowIndex row) {
  if (row >= dates.size() || !dates[row]) {
    throw Error(ErrorCode::kNotTimestamped,
                "clustered image at row " + std::to_string(row) + " has no date");
  }
  return *dates[row];
}

}  // namespace

std::vector<std::optional<Date>> DatesOf(const MetadataTable& table) {
  std::vector<std::optional<Date>> out;
  out.reserve(table.size());
  for (const ImageRecord& rec : table.records()) out.push_back(rec.date);
  return out;
}

TpFp ComputeTpFp(std::span<const std::vector<RowIndex>> clusters,
                 std::span<const std::optional<Date>> dates) {
  TpFp out;
  for (const auto& cluster : clusters) {
    if (cluster.size() < 2) continue;
    std::map<Date, std::size_t> freq;
    std::size_t modal = 0;
    for (RowIndex row : cluster) {
      modal = std::max(modal, ++freq[RequireDate(dates, row)]);
    }
    out.tp += cluster.size() - 1;
    out.fp += cluster.size() - modal;
  }
  return out;
}

std::vector<double> MakeThetaGrid(double min, double max, double step) {
  if (!(step > 0.0) || !(min <= max) || min < -1.0 || max > 1.0) {
    throw Error(ErrorCode::kBadConfig,
                "theta grid needs -1 <= min <= max <= 1 and step > 0");
  }
  const auto count = static_cast<std::size_t>(std::floor((max - min) / step + 1e-9)) + 1;
  std::vector<double> grid;
  grid.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    grid.push_back(std::round((min + static_cast<double>(k) * step) * 1e12) / 1e12);
  }
  return grid;
}

std::vector<double> DefaultThetaGrid() { return MakeThetaGrid(0.90, 1.00, 0.001); }

std::vector<QualityPoint> ThresholdSweep(std::span<const IdentityGraph> graphs,
                                         std::span<const std::optional<Date>> dates,
                                         std::span<const double> grid) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] >= -1.0 && grid[k] <= 1.0) || (k > 0 && !(grid[k] > grid[k - 1]))) {
      throw Error(ErrorCode::kBadConfig,
                  "theta grid must be strictly increasing inside [-1, 1]");
    }
  }
  const bool with_dates = !dates.empty();

  struct State {
    UnionFind uf;
    std::size_t next_edge = 0;
    // Per-root date histogram and its largest bucket.
    std::vector<std::map<Date, std::size_t>> freq;
    std::vector<std::size_t> modal;
  };
  std::vector<State> states;
  states.reserve(graphs.size());
  for (const IdentityGraph& g : graphs) {
    State s{UnionFind(g.rows.size()), 0, {}, {}};
    if (with_dates) {
      s.freq.resize(g.rows.size());
      s.modal.assign(g.rows.size(), 0);
    }
    states.push_back(std::move(s));
  }

  std::size_t tp = 0;
  std::size_t fp = 0;
  std::vector<QualityPoint> points(grid.size());
  for (std::size_t k = grid.size(); k-- > 0;) {
    const double theta = grid[k];
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
      const IdentityGraph& g = graphs[gi];
      State& s = states[gi];
      for (; s.next_edge < g.edges.size() && g.edges[s.next_edge].sim >= theta;
           ++s.next_edge) {
        const SimilarityEdge& e = g.edges[s.next_edge];
        std::uint32_t a = s.uf.Find(e.i);
        std::uint32_t b = s.uf.Find(e.j);
        if (a == b) continue;
        if (with_dates) {
          // Seed histograms lazily so undated singletons never raise.
          for (std::uint32_t root : {a, b}) {
            if (s.modal[root] == 0) {
              s.freq[root][RequireDate(dates, g.rows[root])] = 1;
              s.modal[root] = 1;
            }
          }
        }
        s.uf.Union(a, b);
        ++tp;
        if (!with_dates) continue;
        const std::uint32_t root = s.uf.Find(a);
        const std::uint32_t child = root == a ? b : a;
        if (s.freq[child].size() > s.freq[root].size()) {
          std::swap(s.freq[child], s.freq[root]);
        }
        std::size_t merged_modal = std::max(s.modal[root], s.modal[child]);
        for (const auto& [date, count] : s.freq[child]) {
          merged_modal = std::max(merged_modal, s.freq[root][date] += count);
        }
        fp += s.modal[root] + s.modal[child] - merged_modal;
        s.modal[root] = merged_modal;
        s.freq[child].clear();
        s.modal[child] = 0;
      }
    }
    points[k].theta = theta;
    points[k].tp = tp;
    if (with_dates) points[k].fp = fp;
  }
  return points;
}

std::vector<IdentityGraph> BuildDatasetGraphs(const MetadataTable& table,
                                              std::string_view dataset,
                                              const EmbeddingMatrix& embeddings,
                                              std::size_t threads) {
  const auto keys = table.identities_of_dataset(dataset);
  std::vector<IdentityGraph> graphs(keys.size());
  ParallelFor(keys.size(), threads, [&](std::size_t i) {
    graphs[i] = BuildIdentityGraph(table, keys[i], embeddings);
  });
  return graphs;
}

std::vector<QualityPoint> SweepDataset(const MetadataTable& table,
                                       std::string_view dataset,
                                       std::span<const IdentityGraph> graphs,
                                       std::span<const double> grid) {
  std::vector<std::optional<Date>> dates;
  if (table.is_timestamped(dataset)) dates = DatesOf(table);
  return ThresholdSweep(graphs, dates, grid);
}

DatasetQuality QualityAt(const MetadataTable& table, std::string_view dataset,
                         std::span<const IdentityGraph> graphs, double theta) {
  if (!(theta >= -1.0 && theta <= 1.0)) {
    throw Error(ErrorCode::kBadConfig, "theta must lie in [-1,1]");
  }
  DatasetQuality out;
  out.theta = theta;
  out.timestamped = table.is_timestamped(dataset);
  std::vector<std::vector<RowIndex>> clusters;
  for (const IdentityGraph& g : graphs) {
    for (auto& c : ClusterGraph(g, theta).clusters) {
      if (c.size() < 2) continue;
      ++out.clusters;
      out.clustered_images += c.size();
      clusters.push_back(std::move(c));
    }
  }
  if (out.timestamped) {
    const auto dates = DatesOf(table);
    out.tp_fp = ComputeTpFp(clusters, dates);
    out.purity = BuildPurityTable(clusters, dates);
  }
  return out;
}

std::size_t PurityTable::row_total(std::size_t row) const {
  return std::accumulate(cells_[row].begin(), cells_[row].end(), std::size_t{0});
}

std::size_t PurityTable::total() const {
  std::size_t sum = 0;
  for (std::size_t r = 0; r < kRows; ++r) sum += row_total(r);
  return sum;
}

std::optional<double> PurityTable::single_time_share(std::size_t row) const {
  const std::size_t n = row_total(row);
  if (n == 0) return std::nullopt;
  return static_cast<double>(cells_[row][0]) / static_cast<double>(n);
}

void PurityTable::Add(std::size_t cluster_size, std::size_t unique_dates) {
  if (cluster_size < 2 || unique_dates < 1) return;
  const std::size_t row = std::min<std::size_t>(cluster_size, 6) - 2;
  const std::size_t col = std::min<std::size_t>(unique_dates, 6) - 1;
  ++cells_[row][col];
}

PurityTable BuildPurityTable(std::span<const std::vector<RowIndex>> clusters,
                             std::span<const std::optional<Date>> dates) {
  PurityTable table;
  for (const auto& cluster : clusters) {
    if (cluster.size() < 2) continue;
    std::set<Date> unique;
    for (RowIndex row : cluster) unique.insert(RequireDate(dates, row));
    table.Add(cluster.size(), unique.size());
  }
  return table;
}

SideStats ComputeSideStats(std::span<const std::size_t> images_per_identity) {
  SideStats s;
  for (std::size_t count : images_per_identity) {
    if (count == 0) continue;
    s.counts_desc.push_back(count);
    s.images += count;
    ++s.histogram[count];
  }
  s.identities = s.counts_desc.size();
  if (s.identities == 0) return s;
  std::sort(s.counts_desc.begin(), s.counts_desc.end(), std::greater<>());

  const auto n = static_cast<double>(s.identities);
  auto top_share = [&](double fraction) {
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * n - 1e-9)));
    const std::size_t top = std::accumulate(
        s.counts_desc.begin(), s.counts_desc.begin() + k, std::size_t{0});
    return static_cast<double>(top) / static_cast<double>(s.images);
  };
  s.single_image_fraction =
      static_cast<double>(s.histogram.count(1) ? s.histogram.at(1) : 0) / n;
  s.top1_share = top_share(0.01);
  s.top10_share = top_share(0.10);
  return s;
}

DatasetStats ComputeDatasetStats(const MetadataTable& table,
                                 const SplitAssignment& split) {
  if (split.size() != table.size()) {
    throw Error(ErrorCode::kRowMismatch, "split does not match metadata rows");
  }
  std::vector<std::size_t> train_counts;
  std::vector<std::size_t> test_counts;
  for (const IdentityKey& key : table.identities()) {
    std::size_t train = 0, test = 0;
    for (RowIndex row : table.rows_of_identity(key)) {
      (split.labels[row] == SplitLabel::kTrain ? train : test) += 1;
    }
    train_counts.push_back(train);
    test_counts.push_back(test);
  }
  return {ComputeSideStats(train_counts), ComputeSideStats(test_counts)};
}

namespace {

nlohmann::json OptionalJson(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json SideToJson(const SideStats& s) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [count, ids] : s.histogram) hist.push_back({count, ids});
  return {
      {"identities", s.identities},
      {"images", s.images},
      {"histogram", hist},
      {"counts_desc", s.counts_desc},
      {"single_image_fraction", OptionalJson(s.single_image_fraction)},
      {"top1_share", OptionalJson(s.top1_share)},
      {"top10_share", OptionalJson(s.top10_share)},
  };
}

}  // namespace

nlohmann::json PurityToJson(const PurityTable& table) {
  static constexpr std::array<const char*, PurityTable::kRows> kSizeLabels = {
      "2", "3", "4", "5", "6+"};
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < PurityTable::kRows; ++r) {
    std::vector<std::size_t> counts(PurityTable::kCols);
    for (std::size_t c = 0; c < PurityTable::kCols; ++c) counts[c] = table.count(r, c);
    rows.push_back({{"size", kSizeLabels[r]},
                    {"counts", counts},
                    {"total", table.row_total(r)},
                    {"single_time_share", OptionalJson(table.single_time_share(r))}});
  }
  return {{"columns", {"1", "2", "3", "4", "5", "6+"}},
          {"rows", rows},
          {"total_clusters", table.total()}};
}

nlohmann::json QualityToJson(const DatasetQuality& quality) {
  nlohmann::json doc = {{"theta", quality.theta},
                        {"timestamped", quality.timestamped},
                        {"clusters", quality.clusters},
                        {"clustered_images", quality.clustered_images}};
  if (quality.tp_fp) {
    doc["tp"] = quality.tp_fp->tp;
    doc["fp"] = quality.tp_fp->fp;
  }
  if (quality.purity) doc["purity"] = PurityToJson(*quality.purity);
  return doc;
}

nlohmann::json StatsToJson(const DatasetStats& stats) {
  return {{"train", SideToJson(stats.train)}, {"test", SideToJson(stats.test)}};
}

std::string FormatSweepCsv(std::span<const QualityPoint> points) {
  std::string out = "theta,tp,fp\n";
  for (const QualityPoint& p : points) {
    out += FormatDouble(p.theta) + ',' + std::to_string(p.tp) + ',' +
           (p.fp ? std::to_string(*p.fp) : "") + '\n';
  }
  return out;
}

}  // namespace wildsplit
