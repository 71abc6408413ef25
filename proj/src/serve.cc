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

#include "wildsplit/serve.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <mutex>
#include <set>

#include "httplib.h"
#include "wildsplit/error.h"
#include "wildsplit/io.h"
#include "wildsplit/quality.h"

namespace wildsplit {

namespace {

ApiResponse Fail(int status, std::string_view code, const std::string& message) {
  return {status, {{"error", {{"code", code}, {"message", message}}}}};
}

std::optional<double> ParseReal(std::string_view text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

nlohmann::json ImageJson(const ImageRecord& rec) {
  return {{"image_id", rec.image_id},
          {"path", rec.path ? nlohmann::json(*rec.path) : nlohmann::json(nullptr)},
          {"date", rec.date ? nlohmann::json(rec.date->ToString()) : nlohmann::json(nullptr)}};
}

}  // namespace

std::string ContentTypeFor(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".bmp") return "image/bmp";
  if (ext == ".tif" || ext == ".tiff") return "image/tiff";
  return "application/octet-stream";
}

Session::Session(MetadataTable table, EmbeddingMatrix embeddings,
                 std::filesystem::path config_path, std::size_t threads)
    : table_(std::move(table)),
      embeddings_(std::move(embeddings)),
      config_path_(std::move(config_path)) {
  if (embeddings_.rows() != table_.size()) {
    throw Error(ErrorCode::kRowMismatch, "embeddings do not match metadata rows");
  }
  if (std::filesystem::exists(config_path_)) config_ = LoadSplitConfig(config_path_);
  for (const std::string& dataset : table_.datasets()) {
    graphs_[dataset] = BuildDatasetGraphs(table_, dataset, embeddings_, threads);
  }
}

double Session::ChosenTheta(const std::string& dataset) const {
  std::shared_lock lock(theta_mutex_);
  return config_.ThetaFor(dataset);
}

std::optional<ApiResponse> Session::CheckDataset(const std::string& dataset) const {
  if (!table_.has_dataset(dataset)) {
    return Fail(404, "UnknownDataset", "unknown dataset '" + dataset + "'");
  }
  return std::nullopt;
}

std::optional<ApiResponse> Session::ResolveTheta(const std::string& dataset,
                                                 const std::optional<std::string>& text,
                                                 double& theta) const {
  if (!text) {
    theta = ChosenTheta(dataset);
    return std::nullopt;
  }
  const auto value = ParseReal(*text);
  if (!value || *value < -1.0 || *value > 1.0) {
    return Fail(400, "BadConfig", "theta must be a number in [-1,1]");
  }
  theta = *value;
  return std::nullopt;
}

ApiResponse Session::GetDatasets() const {
  nlohmann::json list = nlohmann::json::array();
  for (const std::string& dataset : table_.datasets()) {
    list.push_back({{"dataset", dataset},
                    {"images", table_.rows_of_dataset(dataset).size()},
                    {"identities", graphs_.at(dataset).size()},
                    {"timestamped", table_.is_timestamped(dataset)},
                    {"theta", ChosenTheta(dataset)}});
  }
  return {200, {{"datasets", list}}};
}

ApiResponse Session::GetSweep(const std::string& dataset) const {
  if (auto err = CheckDataset(dataset)) return *err;
  const auto grid = DefaultThetaGrid();
  const auto points = SweepDataset(table_, dataset, graphs_.at(dataset), grid);
  nlohmann::json list = nlohmann::json::array();
  for (const QualityPoint& p : points) {
    nlohmann::json point = {{"theta", p.theta}, {"tp", p.tp}};
    if (p.fp) point["fp"] = *p.fp;
    list.push_back(point);
  }
  return {200,
          {{"dataset", dataset},
           {"timestamped", table_.is_timestamped(dataset)},
           {"points", list}}};
}

ApiResponse Session::GetClusters(const std::string& dataset,
                                 const std::optional<std::string>& theta_text) const {
  if (auto err = CheckDataset(dataset)) return *err;
  double theta = 0.0;
  if (auto err = ResolveTheta(dataset, theta_text, theta)) return *err;

  struct Listed {
    std::string identity;
    std::string cluster_id;
    std::vector<RowIndex> rows;
  };
  std::vector<Listed> clusters;
  nlohmann::json unclustered = nlohmann::json::array();
  for (const IdentityGraph& graph : graphs_.at(dataset)) {
    const ClusterAssignment assignment = ClusterGraph(graph, theta);
    const auto order = ClusterIdOrder(assignment);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& rows = assignment.clusters[order[k]];
      if (rows.size() < 2) {
        unclustered.push_back(ImageJson(table_[rows.front()]));
        continue;
      }
      clusters.push_back({graph.key.identity,
                          graph.key.identity + "#" + std::to_string(k), rows});
    }
  }
  std::stable_sort(clusters.begin(), clusters.end(), [](const Listed& a, const Listed& b) {
    return a.rows.size() > b.rows.size();
  });

  nlohmann::json list = nlohmann::json::array();
  for (const Listed& c : clusters) {
    nlohmann::json images = nlohmann::json::array();
    std::set<Date> dates;
    for (RowIndex row : c.rows) {
      images.push_back(ImageJson(table_[row]));
      if (table_[row].date) dates.insert(*table_[row].date);
    }
    nlohmann::json date_list = nlohmann::json::array();
    for (const Date& d : dates) date_list.push_back(d.ToString());
    list.push_back({{"identity", c.identity},
                    {"cluster_id", c.cluster_id},
                    {"size", c.rows.size()},
                    {"dates", date_list},
                    {"images", images}});
  }
  return {200,
          {{"dataset", dataset},
           {"theta", theta},
           {"clusters", list},
           {"unclustered", unclustered}}};
}

ApiResponse Session::GetQuality(const std::string& dataset,
                                const std::optional<std::string>& theta_text) const {
  if (auto err = CheckDataset(dataset)) return *err;
  double theta = 0.0;
  if (auto err = ResolveTheta(dataset, theta_text, theta)) return *err;
  nlohmann::json body = QualityToJson(QualityAt(table_, dataset, graphs_.at(dataset), theta));
  body["dataset"] = dataset;
  return {200, body};
}

ApiResponse Session::PutThreshold(const std::string& body) {
  const auto doc = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("dataset") ||
      !doc["dataset"].is_string() || !doc.contains("theta") || !doc["theta"].is_number()) {
    return Fail(400, "BadField", "expected {\"dataset\": string, \"theta\": number}");
  }
  const std::string dataset = doc["dataset"].get<std::string>();
  if (auto err = CheckDataset(dataset)) return *err;
  const double theta = doc["theta"].get<double>();
  if (!(theta >= -1.0 && theta <= 1.0)) {
    return Fail(400, "BadConfig", "theta must be a number in [-1,1]");
  }
  std::unique_lock lock(theta_mutex_);
  PersistThreshold(config_path_, dataset, theta);
  config_.per_dataset_theta[dataset] = theta;
  return {200,
          {{"dataset", dataset},
           {"theta", theta},
           {"config", nlohmann::json::parse(ReadTextFile(config_path_))}}};
}

FileResponse Session::GetImage(const std::string& image_id) const {
  const auto row = table_.find_image(image_id);
  if (!row) return {404, "text/plain", "unknown image\n"};
  const auto& path = table_[*row].path;
  if (!path || path->empty()) return {404, "text/plain", "image has no path\n"};
  const std::filesystem::path full = table_.base_dir() / *path;
  try {
    return {200, ContentTypeFor(full), ReadTextFile(full)};
  } catch (const Error&) {
    return {404, "text/plain", "image file not found\n"};
  }
}

bool Serve(Session& session, const ServeOptions& options) {
  httplib::Server server;
  auto send = [](httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    res.set_content(api.body.dump(), "application/json");
  };
  auto guarded = [send](auto handler) {
    return [send, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        send(res, handler(req));
      } catch (const Error& e) {
        send(res, Fail(500, ErrorCodeName(e.code()), e.what()));
      } catch (const std::exception& e) {
        send(res, Fail(500, "Internal", e.what()));
      }
    };
  };
  auto param = [](const httplib::Request& req, const char* key) -> std::optional<std::string> {
    if (!req.has_param(key)) return std::nullopt;
    return req.get_param_value(key);
  };

  server.Get("/api/datasets", guarded([&](const httplib::Request&) {
               return session.GetDatasets();
             }));
  server.Get("/api/sweep", guarded([&](const httplib::Request& req) {
               return session.GetSweep(req.get_param_value("dataset"));
             }));
  server.Get("/api/clusters", guarded([&](const httplib::Request& req) {
               return session.GetClusters(req.get_param_value("dataset"), param(req, "theta"));
             }));
  server.Get("/api/quality", guarded([&](const httplib::Request& req) {
               return session.GetQuality(req.get_param_value("dataset"), param(req, "theta"));
             }));
  server.Post("/api/threshold", guarded([&](const httplib::Request& req) {
                return session.PutThreshold(req.body);
              }));
  server.Get(R"(/api/image/(.+))", [&](const httplib::Request& req, httplib::Response& res) {
    const FileResponse file = session.GetImage(req.matches[1].str());
    res.status = file.status;
    res.set_content(file.bytes, file.content_type);
  });
  if (options.static_dir && !server.set_mount_point("/", options.static_dir->string())) {
    throw Error(ErrorCode::kIo, "static directory not found: " + options.static_dir->string());
  }
  return server.listen(options.host, options.port);
}

}  // namespace wildsplit
