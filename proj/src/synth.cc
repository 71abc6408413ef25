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

#include "wildsplit/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>

#include "wildsplit/cluster.h"
#include "wildsplit/error.h"
#include "wildsplit/io.h"
#include "wildsplit/rng.h"

namespace wildsplit {

namespace {

using Vec = std::vector<double>;

// Adds N(0, spread^2) to every component.
void Perturb(Rng& rng, Vec& v, double spread) {
  for (double& x : v) x += spread * rng.Normal();
}

void NormalizeInPlace(Vec& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm < 1e-12) throw Error(ErrorCode::kBadSpec, "degenerate synthetic vector");
  for (double& x : v) x /= norm;
}

std::string Padded(const char* prefix, std::size_t k, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, k);
  return buf;
}

}  // namespace

void WorldSpec::Validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::kBadSpec, msg); };
  if (n_datasets == 0) bad("n_datasets must be positive");
  if (identities_per_dataset == 0) bad("identities_per_dataset must be positive");
  if (embedding_dim < 2) bad("embedding_dim must be at least 2");
  if (max_images_per_identity == 0) bad("max_images_per_identity must be positive");
  if (!(mean_images_per_identity >= 1.0) || !std::isfinite(mean_images_per_identity)) {
    bad("mean_images_per_identity must be >= 1");
  }
  if (!(mean_encounters_per_identity >= 1.0) ||
      !std::isfinite(mean_encounters_per_identity)) {
    bad("mean_encounters_per_identity must be >= 1");
  }
  if (!(image_noise >= 0.0) || !(encounter_spread >= image_noise) ||
      !(identity_spread > encounter_spread) || !std::isfinite(identity_spread)) {
    bad("spreads must satisfy 0 <= image_noise <= encounter_spread < identity_spread");
  }
}

bool WorldSpec::IsTimestamped(std::size_t dataset) const {
  return dataset >= timestamped.size() || timestamped[dataset];
}

WorldTruth GenerateWorld(const WorldSpec& spec) {
  spec.Validate();
  Rng rng(StreamSeed(spec.seed, {"synth"}));
  const std::size_t dim = spec.embedding_dim;

  std::vector<ImageRecord> records;
  std::vector<float> values;
  std::vector<std::uint32_t> encounter_of_row;
  const Date epoch = *Date::Parse("2020-01-01");

  for (std::size_t d = 0; d < spec.n_datasets; ++d) {
    const std::string dataset = Padded("ds", d, 2);
    const bool dated = spec.IsTimestamped(d);
    std::int32_t day = epoch.days();

    Vec anchor(dim, 0.0);
    Perturb(rng, anchor, 1.0);
    NormalizeInPlace(anchor);

    for (std::size_t id = 0; id < spec.identities_per_dataset; ++id) {
      const std::string identity = Padded("id", id, 4);
      const std::size_t n_img = std::min<std::uint64_t>(
          rng.Geometric(spec.mean_images_per_identity), spec.max_images_per_identity);
      const std::size_t n_enc = std::min<std::uint64_t>(
          rng.Geometric(spec.mean_encounters_per_identity), n_img);

      Vec centroid = anchor;
      Perturb(rng, centroid, spec.identity_spread);
      NormalizeInPlace(centroid);

      // Every encounter gets one image, the rest are spread at random.
      std::vector<std::size_t> per_encounter(n_enc, 1);
      for (std::size_t k = n_enc; k < n_img; ++k) {
        ++per_encounter[rng.UniformBelow(n_enc)];
      }

      std::size_t image = 0;
      for (std::size_t e = 0; e < n_enc; ++e) {
        Vec center = centroid;
        Perturb(rng, center, spec.encounter_spread);
        const Date date(day++);
        for (std::size_t k = 0; k < per_encounter[e]; ++k, ++image) {
          Vec v = center;
          Perturb(rng, v, spec.image_noise);
          NormalizeInPlace(v);
          for (double x : v) values.push_back(static_cast<float>(x));
          ImageRecord rec;
          rec.image_id = dataset + "-" + identity + "-" + Padded("", image, 3);
          rec.dataset = dataset;
          rec.identity = identity;
          if (dated) rec.date = date;
          records.push_back(std::move(rec));
          encounter_of_row.push_back(static_cast<std::uint32_t>(e));
        }
      }
    }
  }

  WorldTruth world;
  const std::size_t rows = records.size();
  world.table = MetadataTable(std::move(records));
  world.embeddings = EmbeddingMatrix(rows, dim, std::move(values));
  world.embeddings.Normalize();
  world.encounter = std::move(encounter_of_row);
  return world;
}

double OracleTheta(const WorldTruth& world) {
  double min_within = std::numeric_limits<double>::infinity();
  double max_cross = -std::numeric_limits<double>::infinity();
  for (const IdentityKey& key : world.table.identities()) {
    const auto& rows = world.table.rows_of_identity(key);
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        const double sim = CosineSimilarity(world.embeddings.row(rows[a]),
                                            world.embeddings.row(rows[b]));
        if (world.encounter[rows[a]] == world.encounter[rows[b]]) {
          min_within = std::min(min_within, sim);
        } else {
          max_cross = std::max(max_cross, sim);
        }
      }
    }
  }
  const bool has_within = std::isfinite(min_within);
  const bool has_cross = std::isfinite(max_cross);
  if (!has_within) return has_cross ? (max_cross + 1.0) / 2.0 : 1.0;
  if (!has_cross) return (min_within - 1.0) / 2.0;
  if (!(min_within > max_cross)) {
    throw Error(ErrorCode::kNotSeparable,
                "min within-encounter similarity " + FormatDouble(min_within) +
                    " <= max cross-encounter similarity " + FormatDouble(max_cross));
  }
  return (min_within + max_cross) / 2.0;
}

std::vector<std::vector<RowIndex>> TrueEncounters(const WorldTruth& world,
                                                  const IdentityKey& key) {
  std::map<std::uint32_t, std::vector<RowIndex>> groups;
  for (RowIndex row : world.table.rows_of_identity(key)) {
    groups[world.encounter[row]].push_back(row);
  }
  std::vector<std::vector<RowIndex>> out;
  for (auto& [e, rows] : groups) out.push_back(std::move(rows));
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

nlohmann::json WorldSpecToJson(const WorldSpec& spec) {
  nlohmann::json flags = nlohmann::json::array();
  for (std::size_t d = 0; d < spec.n_datasets; ++d) flags.push_back(spec.IsTimestamped(d));
  return {{"seed", spec.seed},
          {"n_datasets", spec.n_datasets},
          {"identities_per_dataset", spec.identities_per_dataset},
          {"mean_images_per_identity", spec.mean_images_per_identity},
          {"max_images_per_identity", spec.max_images_per_identity},
          {"mean_encounters_per_identity", spec.mean_encounters_per_identity},
          {"embedding_dim", spec.embedding_dim},
          {"identity_spread", spec.identity_spread},
          {"encounter_spread", spec.encounter_spread},
          {"image_noise", spec.image_noise},
          {"timestamped", flags}};
}

WorldSpec WorldSpecFromJson(const nlohmann::json& doc) {
  WorldSpec spec;
  try {
    if (!doc.is_object()) throw Error(ErrorCode::kBadSpec, "world spec must be a JSON object");
    auto read = [&](const char* key, auto& field) {
      if (doc.contains(key)) doc.at(key).get_to(field);
    };
    read("seed", spec.seed);
    read("n_datasets", spec.n_datasets);
    read("identities_per_dataset", spec.identities_per_dataset);
    read("mean_images_per_identity", spec.mean_images_per_identity);
    read("max_images_per_identity", spec.max_images_per_identity);
    read("mean_encounters_per_identity", spec.mean_encounters_per_identity);
    read("embedding_dim", spec.embedding_dim);
    read("identity_spread", spec.identity_spread);
    read("encounter_spread", spec.encounter_spread);
    read("image_noise", spec.image_noise);
    if (doc.contains("timestamped")) {
      spec.timestamped.clear();
      for (const auto& flag : doc.at("timestamped")) spec.timestamped.push_back(flag.get<bool>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadSpec, std::string("world spec: ") + e.what());
  }
  spec.Validate();
  return spec;
}

void WriteWorld(const std::filesystem::path& dir, const WorldTruth& world) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
  WriteMetadata(dir / "metadata.csv", world.table);
  WriteEmb1(dir / "embeddings.emb1", world.embeddings);
  nlohmann::json images = nlohmann::json::array();
  for (RowIndex row = 0; row < world.table.size(); ++row) {
    images.push_back({{"image_id", world.table[row].image_id},
                      {"encounter", world.encounter[row]}});
  }
  nlohmann::json truth = {{"images", images}};
  WriteFileAtomic(dir / "truth.json", truth.dump(2) + "\n");
}

}  // namespace wildsplit
