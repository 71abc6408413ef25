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

#ifndef WILDSPLIT_CONFIG_H_
#define WILDSPLIT_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"

namespace wildsplit {

class MetadataTable;

struct SplitConfig {
  double openset_fraction = 0.05;
  double train_ratio = 0.85;
  std::uint64_t seed = 0;
  double default_theta = 0.97;
  std::map<std::string, double, std::less<>> per_dataset_theta;
  // Datasets absent from the map are auto-detected (all records dated).
  std::map<std::string, bool, std::less<>> use_timestamps;

  // Throws BadConfig on out-of-range values.
  void Validate() const;

  double ThetaFor(std::string_view dataset) const;
  bool UsesTimeSplit(const MetadataTable& table, std::string_view dataset) const;
};

nlohmann::json ToJson(const SplitConfig& config);
// Missing keys keep their defaults; unknown keys are ignored.
SplitConfig SplitConfigFromJson(const nlohmann::json& doc);
SplitConfig LoadSplitConfig(const std::filesystem::path& path);

// Rewrites per_dataset_theta[dataset] in the JSON file at `path`, keeping all
// other keys. Creates the file when absent. The write is atomic.
void PersistThreshold(const std::filesystem::path& path,
                      std::string_view dataset, double theta);

}  // namespace wildsplit

#endif  // WILDSPLIT_CONFIG_H_
