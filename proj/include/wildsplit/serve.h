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

// JSON API for interactive threshold tuning.
//
// Handlers are plain member functions returning a status and a body so they
// can be tested without sockets. Serve() binds them to HTTP routes:
//
//   GET  /api/datasets
//   GET  /api/sweep?dataset=
//   GET  /api/clusters?dataset=&theta=
//   GET  /api/quality?dataset=&theta=
//   POST /api/threshold          {"dataset": ..., "theta": ...}
//   GET  /api/image/{image_id}

#ifndef WILDSPLIT_SERVE_H_
#define WILDSPLIT_SERVE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "wildsplit/cluster.h"
#include "wildsplit/config.h"
#include "wildsplit/ingest.h"

namespace wildsplit {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

struct FileResponse {
  int status = 200;
  std::string content_type;
  std::string bytes;
};

class Session {
 public:
  // Edges of every identity are built up front. `config_path` may not exist
  // yet; it is created on the first saved threshold.
  Session(MetadataTable table, EmbeddingMatrix embeddings,
          std::filesystem::path config_path, std::size_t threads = 1);

  const MetadataTable& table() const { return table_; }
  double ChosenTheta(const std::string& dataset) const;

  ApiResponse GetDatasets() const;
  ApiResponse GetSweep(const std::string& dataset) const;
  // A missing theta means the dataset's chosen theta.
  ApiResponse GetClusters(const std::string& dataset,
                          const std::optional<std::string>& theta) const;
  ApiResponse GetQuality(const std::string& dataset,
                         const std::optional<std::string>& theta) const;
  ApiResponse PutThreshold(const std::string& body);
  FileResponse GetImage(const std::string& image_id) const;

 private:
  // nullopt on success, otherwise the error response to return.
  std::optional<ApiResponse> CheckDataset(const std::string& dataset) const;
  std::optional<ApiResponse> ResolveTheta(const std::string& dataset,
                                          const std::optional<std::string>& text,
                                          double& theta) const;

  MetadataTable table_;
  EmbeddingMatrix embeddings_;
  std::filesystem::path config_path_;
  std::map<std::string, std::vector<IdentityGraph>, std::less<>> graphs_;

  mutable std::shared_mutex theta_mutex_;
  SplitConfig config_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8787;
  std::optional<std::filesystem::path> static_dir;
};

// Blocks until the server stops. Returns false if the socket cannot bind.
bool Serve(Session& session, const ServeOptions& options);

std::string ContentTypeFor(const std::filesystem::path& path);

}  // namespace wildsplit

#endif  // WILDSPLIT_SERVE_H_
