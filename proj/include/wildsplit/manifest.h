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

// Reproducibility record written next to command outputs. It holds no
// timestamps, host names or thread counts, so equal inputs give equal bytes.
// Files are recorded by file name only, which keeps manifests comparable
// across output directories.

#ifndef WILDSPLIT_MANIFEST_H_
#define WILDSPLIT_MANIFEST_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

namespace wildsplit {

class RunManifest {
 public:
  explicit RunManifest(std::string command) : command_(std::move(command)) {}

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  // `role` names the flag, e.g. "metadata". Hashes the file now.
  void AddInput(const std::string& role, const std::filesystem::path& path);
  void AddOutput(const std::string& role, const std::filesystem::path& path);

  nlohmann::json ToJson() const;
  void Write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  nlohmann::json config_ = nlohmann::json::object();
  std::uint64_t seed_ = 0;
  std::map<std::string, nlohmann::json> inputs_;
  std::map<std::string, nlohmann::json> outputs_;
};

std::string ToolVersion();

}  // namespace wildsplit

#endif  // WILDSPLIT_MANIFEST_H_
