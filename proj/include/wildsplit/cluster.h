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

// Threshold-stopped single-linkage clustering of the images of one identity.
//
// All pairwise cosine similarities of an identity are enumerated, sorted in
// descending order, and merged with union-find until the first edge strictly
// below theta. The resulting connected components are the encounter proxies
// used by the similarity-aware split.

#ifndef WILDSPLIT_CLUSTER_H_
#define WILDSPLIT_CLUSTER_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wildsplit/config.h"
#include "wildsplit/ingest.h"

namespace wildsplit {

// Endpoints are positions in the row list the edge set was built from,
// with i < j.
struct SimilarityEdge {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double sim = 0.0;

  friend bool operator==(const SimilarityEdge&, const SimilarityEdge&) = default;
};

// Dot product accumulated in double and clamped to [-1, 1]. Inputs are
// expected to be unit vectors. Throws DimMismatch.
double CosineSimilarity(std::span<const float> u, std::span<const float> v);

// Sort order used everywhere: descending sim, then ascending (i, j).
bool EdgeBefore(const SimilarityEdge& a, const SimilarityEdge& b);

// All n(n-1)/2 edges among `rows`, sorted with EdgeBefore.
std::vector<SimilarityEdge> BuildEdges(std::span<const RowIndex> rows,
                                       const EmbeddingMatrix& embeddings);

using Cluster = std::vector<std::uint32_t>;

// Connected components of {(i, j) : sim >= theta} over nodes [0, n). Each
// cluster is sorted ascending and clusters are ordered by smallest member.
// Singletons are included. Throws UnsortedEdges if a processed edge has a
// larger sim than its predecessor.
std::vector<Cluster> FindClusters(std::span<const SimilarityEdge> edges,
                                  std::size_t n, double theta);

struct ClusterAssignment {
  IdentityKey key;
  double theta = 0.0;
  // Global row indices; same ordering rules as FindClusters.
  std::vector<std::vector<RowIndex>> clusters;
};

// Precomputed sorted edge list of one identity. Lets callers recluster at
// many thresholds without recomputing similarities.
struct IdentityGraph {
  IdentityKey key;
  std::vector<RowIndex> rows;
  std::vector<SimilarityEdge> edges;
};

IdentityGraph BuildIdentityGraph(const MetadataTable& table,
                                 const IdentityKey& key,
                                 const EmbeddingMatrix& embeddings);
ClusterAssignment ClusterGraph(const IdentityGraph& graph, double theta);

ClusterAssignment ClusterIdentity(const MetadataTable& table,
                                  const IdentityKey& key,
                                  const EmbeddingMatrix& embeddings,
                                  double theta);

// One assignment per identity of `dataset`, in identity-key order, at
// config.ThetaFor(dataset).
std::vector<ClusterAssignment> ClusterDataset(const MetadataTable& table,
                                              std::string_view dataset,
                                              const EmbeddingMatrix& embeddings,
                                              const SplitConfig& config,
                                              std::size_t threads = 1);

// Cluster indices ordered by descending size, then ascending smallest member.
// Position k in the result gets cluster id `<identity>#<k>`.
std::vector<std::size_t> ClusterIdOrder(const ClusterAssignment& assignment);

// `image_id,dataset,identity,cluster_id`, rows in metadata order.
std::string FormatClusterFile(const MetadataTable& table,
                              std::span<const ClusterAssignment> assignments);

}  // namespace wildsplit

#endif  // WILDSPLIT_CLUSTER_H_
