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

#include "wildsplit/cluster.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wildsplit/error.h"
#include "wildsplit/parallel.h"
#include "wildsplit/union_find.h"

namespace wildsplit {

double CosineSimilarity(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kDimMismatch,
                "vectors of length " + std::to_string(u.size()) + " and " +
                    std::to_string(v.size()));
  }
  double dot = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    dot += static_cast<double>(u[k]) * static_cast<double>(v[k]);
  }
  return std::clamp(dot, -1.0, 1.0);
}

bool EdgeBefore(const SimilarityEdge& a, const SimilarityEdge& b) {
  if (a.sim != b.sim) return a.sim > b.sim;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}

std::vector<SimilarityEdge> BuildEdges(std::span<const RowIndex> rows,
                                       const EmbeddingMatrix& embeddings) {
  const std::size_t n = rows.size();
  for (RowIndex r : rows) {
    if (r >= embeddings.rows()) {
      throw Error(ErrorCode::kRowMismatch,
                  "row " + std::to_string(r) + " outside embedding matrix");
    }
  }
  std::vector<SimilarityEdge> edges;
  edges.reserve(n * (n - (n > 0 ? 1 : 0)) / 2);
  for (std::uint32_t a = 0; a < n; ++a) {
    const auto u = embeddings.row(rows[a]);
    for (std::uint32_t b = a + 1; b < n; ++b) {
      edges.push_back({a, b, CosineSimilarity(u, embeddings.row(rows[b]))});
    }
  }
  std::sort(edges.begin(), edges.end(), EdgeBefore);
  return edges;
}

std::vector<Cluster> FindClusters(std::span<const SimilarityEdge> edges,
                                  std::size_t n, double theta) {
  if (std::isnan(theta)) throw Error(ErrorCode::kBadConfig, "theta is NaN");
  UnionFind uf(n);
  const SimilarityEdge* prev = nullptr;
  for (const SimilarityEdge& e : edges) {
    if (prev != nullptr && e.sim > prev->sim) {
      throw Error(ErrorCode::kUnsortedEdges,
                  "edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                      ") has larger similarity than its predecessor");
    }
    prev = &e;
    if (e.sim < theta) break;
    if (e.i >= n || e.j >= n) {
      throw Error(ErrorCode::kDimMismatch, "edge endpoint out of range");
    }
    uf.Union(e.i, e.j);
  }

  std::vector<Cluster> clusters;
  std::vector<std::int64_t> slot(n, -1);
  for (std::uint32_t v = 0; v < n; ++v) {
    const std::uint32_t root = uf.Find(v);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::int64_t>(clusters.size());
      clusters.emplace_back();
    }
    clusters[slot[root]].push_back(v);
  }
  // Visiting nodes in ascending order already yields sorted members and
  // clusters ordered by their smallest member.
  return clusters;
}

IdentityGraph BuildIdentityGraph(const MetadataTable& table,
                                 const IdentityKey& key,
                                 const EmbeddingMatrix& embeddings) {
  IdentityGraph graph;
  graph.key = key;
  graph.rows = table.rows_of_identity(key);
  graph.edges = BuildEdges(graph.rows, embeddings);
  return graph;
}

ClusterAssignment ClusterGraph(const IdentityGraph& graph, double theta) {
  ClusterAssignment out;
  out.key = graph.key;
  out.theta = theta;
  for (const Cluster& local : FindClusters(graph.edges, graph.rows.size(), theta)) {
    std::vector<RowIndex> rows;
    rows.reserve(local.size());
    for (std::uint32_t pos : local) rows.push_back(graph.rows[pos]);
    out.clusters.push_back(std::move(rows));
  }
  return out;
}

ClusterAssignment ClusterIdentity(const MetadataTable& table,
                                  const IdentityKey& key,
                                  const EmbeddingMatrix& embeddings,
                                  double theta) {
  return ClusterGraph(BuildIdentityGraph(table, key, embeddings), theta);
}

std::vector<ClusterAssignment> ClusterDataset(const MetadataTable& table,
                                              std::string_view dataset,
                                              const EmbeddingMatrix& embeddings,
                                              const SplitConfig& config,
                                              std::size_t threads) {
  const std::vector<IdentityKey> keys = table.identities_of_dataset(dataset);
  const double theta = config.ThetaFor(dataset);
  std::vector<ClusterAssignment> out(keys.size());
  ParallelFor(keys.size(), threads, [&](std::size_t k) {
    out[k] = ClusterIdentity(table, keys[k], embeddings, theta);
  });
  return out;
}

std::vector<std::size_t> ClusterIdOrder(const ClusterAssignment& assignment) {
  std::vector<std::size_t> order(assignment.clusters.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& c = assignment.clusters;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (c[a].size() != c[b].size()) return c[a].size() > c[b].size();
    return c[a].front() < c[b].front();
  });
  return order;
}

std::string FormatClusterFile(const MetadataTable& table,
                              std::span<const ClusterAssignment> assignments) {
  std::vector<std::string> cluster_id(table.size());
  for (const ClusterAssignment& a : assignments) {
    const auto order = ClusterIdOrder(a);
    for (std::size_t k = 0; k < order.size(); ++k) {
      for (RowIndex row : a.clusters[order[k]]) {
        cluster_id[row] = a.key.identity + "#" + std::to_string(k);
      }
    }
  }
  std::string out = "image_id,dataset,identity,cluster_id\n";
  for (RowIndex row = 0; row < table.size(); ++row) {
    if (cluster_id[row].empty()) continue;
    const ImageRecord& rec = table[row];
    out += rec.image_id + ',' + rec.dataset + ',' + rec.identity + ',' +
           cluster_id[row] + '\n';
  }
  return out;
}

}  // namespace wildsplit
