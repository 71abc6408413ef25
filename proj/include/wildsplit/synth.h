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

// Synthetic re-identification worlds with known encounter structure.
//
// Each dataset has a random unit anchor. Identity centroids are the anchor
// plus per-component Gaussian noise of scale identity_spread, re-normalized;
// the default spread makes them close to uniform on the sphere. Encounter
// centers add encounter_spread noise to the centroid and images add
// image_noise to their encounter center before normalization.

#ifndef WILDSPLIT_SYNTH_H_
#define WILDSPLIT_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "wildsplit/ingest.h"

namespace wildsplit {

struct WorldSpec {
  std::uint64_t seed = 0;
  std::size_t n_datasets = 2;
  std::size_t identities_per_dataset = 40;
  double mean_images_per_identity = 4.0;
  std::size_t max_images_per_identity = 40;
  double mean_encounters_per_identity = 2.0;
  std::size_t embedding_dim = 64;
  double identity_spread = 2.0;
  double encounter_spread = 0.15;
  double image_noise = 0.01;
  // One flag per dataset; missing entries default to true.
  std::vector<bool> timestamped;

  // Throws BadSpec.
  void Validate() const;
  bool IsTimestamped(std::size_t dataset) const;
};

struct WorldTruth {
  MetadataTable table;
  EmbeddingMatrix embeddings;
  // Per row; encounter indices restart at 0 for every identity.
  std::vector<std::uint32_t> encounter;
};

// Deterministic in spec. Dates count up one day per encounter within each
// dataset, starting 2020-01-01; untimestamped datasets get no dates.
WorldTruth GenerateWorld(const WorldSpec& spec);

// Midpoint between the smallest within-encounter similarity and the largest
// same-identity cross-encounter similarity. Throws NotSeparable when the
// first does not exceed the second.
double OracleTheta(const WorldTruth& world);

// True encounters of every identity as global row lists, in the same
// canonical order FindClusters uses (ascending members, by smallest member).
std::vector<std::vector<RowIndex>> TrueEncounters(const WorldTruth& world,
                                                  const IdentityKey& key);

nlohmann::json WorldSpecToJson(const WorldSpec& spec);
WorldSpec WorldSpecFromJson(const nlohmann::json& doc);

// metadata.csv, embeddings.emb1 and truth.json inside `dir` (created).
void WriteWorld(const std::filesystem::path& dir, const WorldTruth& world);

}  // namespace wildsplit

#endif  // WILDSPLIT_SYNTH_H_
