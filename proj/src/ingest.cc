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

#include "wildsplit/ingest.h"

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <set>

#include "json.hpp"
#include "wildsplit/error.h"
#include "wildsplit/io.h"

namespace wildsplit {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kBadHeader: return "BadHeader";
    case ErrorCode::kBadField: return "BadField";
    case ErrorCode::kBadDate: return "BadDate";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kRowMismatch: return "RowMismatch";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kClassCountMismatch: return "ClassCountMismatch";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kUnsortedEdges: return "UnsortedEdges";
    case ErrorCode::kUnknownIdentity: return "UnknownIdentity";
    case ErrorCode::kUnknownDataset: return "UnknownDataset";
    case ErrorCode::kNotTimestamped: return "NotTimestamped";
    case ErrorCode::kClusterMismatch: return "ClusterMismatch";
    case ErrorCode::kEmptyGallery: return "EmptyGallery";
    case ErrorCode::kDegenerateCentroid: return "DegenerateCentroid";
    case ErrorCode::kBadLogits: return "BadLogits";
    case ErrorCode::kIncomplete: return "Incomplete";
    case ErrorCode::kUndefined: return "Undefined";
    case ErrorCode::kBadSpec: return "BadSpec";
    case ErrorCode::kNotSeparable: return "NotSeparable";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// Date

std::optional<Date> Date::Parse(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto digits = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int value = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (text[i] < '0' || text[i] > '9') return std::nullopt;
      value = value * 10 + (text[i] - '0');
    }
    return value;
  };
  const auto y = digits(0, 4);
  const auto m = digits(5, 2);
  const auto d = digits(8, 2);
  if (!y || !m || !d) return std::nullopt;
  const std::chrono::year_month_day ymd{
      std::chrono::year(*y), std::chrono::month(static_cast<unsigned>(*m)),
      std::chrono::day(static_cast<unsigned>(*d))};
  if (!ymd.ok()) return std::nullopt;
  const std::chrono::sys_days days(ymd);
  return Date(static_cast<std::int32_t>(days.time_since_epoch().count()));
}

std::string Date::ToString() const {
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days(std::chrono::days(days_))};
  std::array<char, 16> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02u",
                static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf.data();
}

// ---------------------------------------------------------------------------
// MetadataTable

MetadataTable::MetadataTable(std::vector<ImageRecord> records)
    : records_(std::move(records)) {
  std::map<std::string, bool, std::less<>> all_dated;
  for (RowIndex row = 0; row < records_.size(); ++row) {
    const ImageRecord& rec = records_[row];
    if (!id_to_row_.emplace(rec.image_id, row).second) {
      throw Error(ErrorCode::kDuplicateId,
                  "duplicate image_id '" + rec.image_id + "'");
    }
    dataset_rows_[rec.dataset].push_back(row);
    identity_rows_[rec.key()].push_back(row);
    auto [it, inserted] = all_dated.emplace(rec.dataset, true);
    if (!rec.date) it->second = false;
  }
  timestamped_ = std::move(all_dated);
}

std::vector<std::string> MetadataTable::datasets() const {
  std::vector<std::string> out;
  out.reserve(dataset_rows_.size());
  for (const auto& [name, rows] : dataset_rows_) out.push_back(name);
  return out;
}

bool MetadataTable::has_dataset(std::string_view dataset) const {
  return dataset_rows_.find(dataset) != dataset_rows_.end();
}

const std::vector<RowIndex>& MetadataTable::rows_of_dataset(
    std::string_view dataset) const {
  auto it = dataset_rows_.find(dataset);
  if (it == dataset_rows_.end()) {
    throw Error(ErrorCode::kUnknownDataset,
                "unknown dataset '" + std::string(dataset) + "'");
  }
  return it->second;
}

std::vector<IdentityKey> MetadataTable::identities_of_dataset(
    std::string_view dataset) const {
  rows_of_dataset(dataset);  // validates
  std::vector<IdentityKey> out;
  auto it = identity_rows_.lower_bound(IdentityKey{std::string(dataset), ""});
  for (; it != identity_rows_.end() && it->first.dataset == dataset; ++it) {
    out.push_back(it->first);
  }
  return out;
}

std::vector<IdentityKey> MetadataTable::identities() const {
  std::vector<IdentityKey> out;
  out.reserve(identity_rows_.size());
  for (const auto& [key, rows] : identity_rows_) out.push_back(key);
  return out;
}

const std::vector<RowIndex>& MetadataTable::rows_of_identity(
    const IdentityKey& key) const {
  auto it = identity_rows_.find(key);
  if (it == identity_rows_.end()) {
    throw Error(ErrorCode::kUnknownIdentity,
                "unknown identity '" + key.identity + "' in dataset '" +
                    key.dataset + "'");
  }
  return it->second;
}

bool MetadataTable::is_timestamped(std::string_view dataset) const {
  auto it = timestamped_.find(dataset);
  if (it == timestamped_.end()) {
    throw Error(ErrorCode::kUnknownDataset,
                "unknown dataset '" + std::string(dataset) + "'");
  }
  return it->second;
}

std::optional<RowIndex> MetadataTable::find_image(
    std::string_view image_id) const {
  auto it = id_to_row_.find(image_id);
  if (it == id_to_row_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Metadata CSV

namespace {

constexpr std::array<std::string_view, 5> kMetadataColumns = {
    "image_id", "dataset", "identity", "date", "path"};

std::string RowLabel(std::size_t row, std::size_t line) {
  return "row " + std::to_string(row) + " (line " + std::to_string(line) + ")";
}

}  // namespace

MetadataTable ParseMetadata(std::string_view text) {
  std::vector<std::string_view> lines = SplitFields(text, '\n');
  for (auto& line : lines) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::kBadHeader, "empty metadata file");

  const auto header = SplitFields(lines[0], ',');
  std::array<std::size_t, kMetadataColumns.size()> column{};
  for (std::size_t c = 0; c < kMetadataColumns.size(); ++c) {
    std::size_t found = header.size();
    for (std::size_t h = 0; h < header.size(); ++h) {
      if (header[h] == kMetadataColumns[c]) found = h;
    }
    if (found == header.size()) {
      throw Error(ErrorCode::kBadHeader, "missing header column '" +
                                             std::string(kMetadataColumns[c]) +
                                             "'");
    }
    column[c] = found;
  }

  std::vector<ImageRecord> records;
  records.reserve(lines.size() - 1);
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const std::size_t row = records.size();
    const auto fields = SplitFields(lines[l], ',');
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kBadField,
                  RowLabel(row, l + 1) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    ImageRecord rec;
    rec.image_id = fields[column[0]];
    rec.dataset = fields[column[1]];
    rec.identity = fields[column[2]];
    if (rec.image_id.empty() || rec.dataset.empty() || rec.identity.empty()) {
      throw Error(ErrorCode::kBadField,
                  RowLabel(row, l + 1) + ": empty image_id/dataset/identity");
    }
    const std::string_view date_text = fields[column[3]];
    if (!date_text.empty()) {
      rec.date = Date::Parse(date_text);
      if (!rec.date) {
        throw Error(ErrorCode::kBadDate, RowLabel(row, l + 1) +
                                             ": malformed date '" +
                                             std::string(date_text) + "'");
      }
    }
    if (!fields[column[4]].empty()) rec.path = std::string(fields[column[4]]);
    records.push_back(std::move(rec));
  }
  return MetadataTable(std::move(records));
}

MetadataTable LoadMetadata(const std::filesystem::path& path) {
  MetadataTable table = ParseMetadata(ReadTextFile(path));
  table.set_base_dir(path.parent_path());
  return table;
}

void WriteMetadata(const std::filesystem::path& path,
                   const MetadataTable& table) {
  std::string out = "image_id,dataset,identity,date,path\n";
  for (const ImageRecord& rec : table.records()) {
    out += rec.image_id + ',' + rec.dataset + ',' + rec.identity + ',' +
           (rec.date ? rec.date->ToString() : "") + ',' +
           rec.path.value_or("") + '\n';
  }
  WriteFileAtomic(path, out);
}

// ---------------------------------------------------------------------------
// EmbeddingMatrix / EMB1

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dims)
    : rows_(rows), dims_(dims), values_(rows * dims, 0.0f) {}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dims,
                                 std::vector<float> values)
    : rows_(rows), dims_(dims), values_(std::move(values)) {
  if (values_.size() != rows_ * dims_) {
    throw Error(ErrorCode::kDimMismatch, "matrix value count mismatch");
  }
}

void EmbeddingMatrix::Normalize() {
  for (std::size_t r = 0; r < rows_; ++r) {
    auto v = mutable_row(r);
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * x;
    const double norm = std::sqrt(sum);
    if (!(norm >= 1e-12)) {
      throw Error(ErrorCode::kZeroVector,
                  "row " + std::to_string(r) + " has zero norm");
    }
    for (float& x : v) x = static_cast<float>(x / norm);
  }
  normalized_ = true;
}

namespace {

constexpr std::array<char, 4> kEmb1Magic = {'E', 'M', 'B', '1'};

void PutU32(std::vector<char>& out, std::size_t pos, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[pos + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::uint32_t GetU32(std::span<const char> bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i]))
         << (8 * i);
  }
  return v;
}

}  // namespace

std::vector<char> EncodeEmb1(const EmbeddingMatrix& matrix) {
  std::vector<char> out(12 + matrix.values().size() * 4);
  std::copy(kEmb1Magic.begin(), kEmb1Magic.end(), out.begin());
  PutU32(out, 4, static_cast<std::uint32_t>(matrix.rows()));
  PutU32(out, 8, static_cast<std::uint32_t>(matrix.dims()));
  std::size_t pos = 12;
  for (float x : matrix.values()) {
    PutU32(out, pos, std::bit_cast<std::uint32_t>(x));
    pos += 4;
  }
  return out;
}

EmbeddingMatrix DecodeEmb1(std::span<const char> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::kTruncated, "EMB1 file too short");
  if (!std::equal(kEmb1Magic.begin(), kEmb1Magic.end(), bytes.begin())) {
    throw Error(ErrorCode::kBadMagic, "missing EMB1 magic");
  }
  if (bytes.size() < 12) throw Error(ErrorCode::kTruncated, "EMB1 header truncated");
  const std::uint64_t rows = GetU32(bytes, 4);
  const std::uint64_t dims = GetU32(bytes, 8);
  const std::uint64_t expected = 12 + rows * dims * 4;
  if (bytes.size() != expected) {
    throw Error(ErrorCode::kTruncated,
                "EMB1 size " + std::to_string(bytes.size()) +
                    " inconsistent with header (" + std::to_string(rows) + "x" +
                    std::to_string(dims) + ")");
  }
  std::vector<float> values(rows * dims);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(GetU32(bytes, 12 + 4 * i));
  }
  return EmbeddingMatrix(rows, dims, std::move(values));
}

EmbeddingMatrix ReadEmb1(const std::filesystem::path& path) {
  return DecodeEmb1(ReadBinaryFile(path));
}

void WriteEmb1(const std::filesystem::path& path,
               const EmbeddingMatrix& matrix) {
  WriteBytesAtomic(path, EncodeEmb1(matrix));
}

namespace {

void CheckRows(const EmbeddingMatrix& m, std::size_t expected_rows) {
  if (m.rows() != expected_rows) {
    throw Error(ErrorCode::kRowMismatch,
                "matrix has " + std::to_string(m.rows()) + " rows, expected " +
                    std::to_string(expected_rows));
  }
}

}  // namespace

EmbeddingMatrix LoadEmbeddings(const std::filesystem::path& path,
                               std::size_t expected_rows) {
  EmbeddingMatrix m = ReadEmb1(path);
  CheckRows(m, expected_rows);
  m.Normalize();
  return m;
}

LogitTable LoadLogits(const std::filesystem::path& path,
                      const std::filesystem::path& classes_path,
                      std::size_t expected_rows) {
  LogitTable table;
  table.logits = ReadEmb1(path);
  CheckRows(table.logits, expected_rows);
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(ReadTextFile(classes_path));
    table.classes = sidecar.get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadField,
                "class sidecar must be a JSON array of strings: " +
                    std::string(e.what()));
  }
  if (table.classes.size() != table.logits.dims()) {
    throw Error(ErrorCode::kClassCountMismatch,
                "logits have " + std::to_string(table.logits.dims()) +
                    " columns but sidecar lists " +
                    std::to_string(table.classes.size()) + " classes");
  }
  return table;
}

}  // namespace wildsplit
