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

#include "wildsplit/manifest.h"

#include "wildsplit/io.h"

#ifndef WILDSPLIT_VERSION
#define WILDSPLIT_VERSION "dev"
#endif

namespace wildsplit {

namespace {

nlohmann::json FileEntry(const std::filesystem::path& path) {
  return {{"file", path.filename().string()}, {"sha256", Sha256File(path)}};
}

}  // namespace

std::string ToolVersion() { return WILDSPLIT_VERSION; }

void RunManifest::AddInput(const std::string& role, const std::filesystem::path& path) {
  inputs_[role] = FileEntry(path);
}

void RunManifest::AddOutput(const std::string& role, const std::filesystem::path& path) {
  outputs_[role] = FileEntry(path);
}

nlohmann::json RunManifest::ToJson() const {
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& [role, entry] : inputs_) inputs[role] = entry;
  nlohmann::json outputs = nlohmann::json::object();
  for (const auto& [role, entry] : outputs_) outputs[role] = entry;
  return {{"tool", "wildsplit"},
          {"version", ToolVersion()},
          {"command", command_},
          {"seed", seed_},
          {"config", config_},
          {"inputs", inputs},
          {"outputs", outputs}};
}

void RunManifest::Write(const std::filesystem::path& path) const {
  WriteFileAtomic(path, ToJson().dump(2) + "\n");
}

}  // namespace wildsplit
