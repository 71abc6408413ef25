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

#include "wildsplit/config.h"

#include <cmath>

#include "wildsplit/error.h"
#include "wildsplit/ingest.h"
#include "wildsplit/io.h"

namespace wildsplit {

namespace {

bool ValidTheta(double theta) { return theta >= -1.0 && theta <= 1.0; }

}  // namespace

void SplitConfig::Validate() const {
  if (!(openset_fraction >= 0.0 && openset_fraction <= 1.0)) {
    throw Error(ErrorCode::kBadConfig, "openset_fraction must lie in [0,1]");
  }
  if (!(train_ratio > 0.0 && train_ratio <= 1.0)) {
    throw Error(ErrorCode::kBadConfig, "train_ratio must lie in (0,1]");
  }
  if (!ValidTheta(default_theta)) {
    throw Error(ErrorCode::kBadConfig, "default_theta must lie in [-1,1]");
  }
  for (const auto& [dataset, theta] : per_dataset_theta) {
    if (!ValidTheta(theta)) {
      throw Error(ErrorCode::kBadConfig,
                  "theta for dataset '" + dataset + "' must lie in [-1,1]");
    }
  }
}

double SplitConfig::ThetaFor(std::string_view dataset) const {
  auto it = per_dataset_theta.find(dataset);
  return it == per_dataset_theta.end() ? default_theta : it->second;
}

bool SplitConfig::UsesTimeSplit(const MetadataTable& table,
                                std::string_view dataset) const {
  auto it = use_timestamps.find(dataset);
  if (it != use_timestamps.end()) return it->second;
  return table.is_timestamped(dataset);
}

nlohmann::json ToJson(const SplitConfig& config) {
  nlohmann::json doc;
  doc["openset_fraction"] = config.openset_fraction;
  doc["train_ratio"] = config.train_ratio;
  doc["seed"] = config.seed;
  doc["default_theta"] = config.default_theta;
  doc["per_dataset_theta"] = nlohmann::json::object();
  for (const auto& [k, v] : config.per_dataset_theta) doc["per_dataset_theta"][k] = v;
  doc["use_timestamps"] = nlohmann::json::object();
  for (const auto& [k, v] : config.use_timestamps) doc["use_timestamps"][k] = v;
  return doc;
}

SplitConfig SplitConfigFromJson(const nlohmann::json& doc) {
  SplitConfig config;
  try {
    if (!doc.is_object()) throw Error(ErrorCode::kBadConfig, "config must be a JSON object");
    if (doc.contains("openset_fraction")) config.openset_fraction = doc.at("openset_fraction").get<double>();
    if (doc.contains("train_ratio")) config.train_ratio = doc.at("train_ratio").get<double>();
    if (doc.contains("seed")) config.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("default_theta")) config.default_theta = doc.at("default_theta").get<double>();
    if (doc.contains("per_dataset_theta")) {
      for (const auto& [k, v] : doc.at("per_dataset_theta").items()) {
        config.per_dataset_theta[k] = v.get<double>();
      }
    }
    if (doc.contains("use_timestamps")) {
      for (const auto& [k, v] : doc.at("use_timestamps").items()) {
        config.use_timestamps[k] = v.get<bool>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadConfig, std::string("bad config: ") + e.what());
  }
  config.Validate();
  return config;
}

SplitConfig LoadSplitConfig(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ReadTextFile(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadConfig,
                "cannot parse " + path.string() + ": " + e.what());
  }
  return SplitConfigFromJson(doc);
}

void PersistThreshold(const std::filesystem::path& path,
                      std::string_view dataset, double theta) {
  if (!ValidTheta(theta)) {
    throw Error(ErrorCode::kBadConfig, "theta must lie in [-1,1]");
  }
  nlohmann::json doc = nlohmann::json::object();
  if (std::filesystem::exists(path)) {
    try {
      doc = nlohmann::json::parse(ReadTextFile(path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kBadConfig,
                  "cannot parse " + path.string() + ": " + e.what());
    }
  }
  if (!doc.is_object()) throw Error(ErrorCode::kBadConfig, "config must be a JSON object");
  doc["per_dataset_theta"][std::string(dataset)] = theta;
  WriteFileAtomic(path, doc.dump(2) + "\n");
}

}  // namespace wildsplit
