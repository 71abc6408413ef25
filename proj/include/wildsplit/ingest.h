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

// Loading of the metadata table, EMB1 embedding/logit containers and the
// class sidecar. Row order of the metadata table is the global image index
// shared by every other module.

#ifndef WILDSPLIT_INGEST_H_
#define WILDSPLIT_INGEST_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wildsplit {

using RowIndex = std::uint32_t;

// Calendar date stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch)
      : days_(days_since_epoch) {}

  // Strict `YYYY-MM-DD`; returns nullopt for anything else, including
  // impossible dates such as 2023-02-30.
  static std::optional<Date> Parse(std::string_view text);

  std::string ToString() const;
  constexpr std::int32_t days() const { return days_; }

  friend constexpr auto operator<=>(Date, Date) = default;

 private:
  std::int32_t days_ = 0;
};

// Identities are scoped per dataset.
struct IdentityKey {
  std::string dataset;
  std::string identity;

  friend auto operator<=>(const IdentityKey&, const IdentityKey&) = default;
  friend bool operator==(const IdentityKey&, const IdentityKey&) = default;
};

struct ImageRecord {
  std::string image_id;
  std::string dataset;
  std::string identity;
  std::optional<Date> date;
  std::optional<std::string> path;

  IdentityKey key() const { return {dataset, identity}; }
};

class MetadataTable {
 public:
  MetadataTable() = default;
  explicit MetadataTable(std::vector<ImageRecord> records);

  std::size_t size() const { return records_.size(); }
  const std::vector<ImageRecord>& records() const { return records_; }
  const ImageRecord& operator[](RowIndex row) const { return records_[row]; }

  // Sorted dataset names.
  std::vector<std::string> datasets() const;
  bool has_dataset(std::string_view dataset) const;

  // Throws UnknownDataset.
  const std::vector<RowIndex>& rows_of_dataset(std::string_view dataset) const;
  // Identity keys of a dataset in ascending key order. Throws UnknownDataset.
  std::vector<IdentityKey> identities_of_dataset(std::string_view dataset) const;
  // All identity keys, ascending.
  std::vector<IdentityKey> identities() const;
  // Ascending row indices. Throws UnknownIdentity.
  const std::vector<RowIndex>& rows_of_identity(const IdentityKey& key) const;

  // True iff every record of the dataset carries a date.
  bool is_timestamped(std::string_view dataset) const;

  std::optional<RowIndex> find_image(std::string_view image_id) const;

  // Directory the table was loaded from; image paths are relative to it.
  const std::filesystem::path& base_dir() const { return base_dir_; }
  void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }

 private:
  std::vector<ImageRecord> records_;
  std::map<std::string, std::vector<RowIndex>, std::less<>> dataset_rows_;
  std::map<IdentityKey, std::vector<RowIndex>> identity_rows_;
  std::map<std::string, bool, std::less<>> timestamped_;
  std::map<std::string, RowIndex, std::less<>> id_to_row_;
  std::filesystem::path base_dir_;
};

// Dense row-major float matrix. Used for embeddings (normalized) and for
// logits (raw).
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dims);
  EmbeddingMatrix(std::size_t rows, std::size_t dims,
                  std::vector<float> values);

  std::size_t rows() const { return rows_; }
  std::size_t dims() const { return dims_; }
  bool normalized() const { return normalized_; }

  std::span<const float> row(std::size_t r) const {
    return {values_.data() + r * dims_, dims_};
  }
  std::span<float> mutable_row(std::size_t r) {
    return {values_.data() + r * dims_, dims_};
  }
  const std::vector<float>& values() const { return values_; }

  // Scales every row to unit Euclidean norm (norm accumulated in double).
  // Throws ZeroVector naming the first row with norm < 1e-12.
  void Normalize();

 private:
  std::size_t rows_ = 0;
  std::size_t dims_ = 0;
  std::vector<float> values_;
  bool normalized_ = false;
};

struct LogitTable {
  EmbeddingMatrix logits;
  std::vector<std::string> classes;
};

MetadataTable ParseMetadata(std::string_view text);
MetadataTable LoadMetadata(const std::filesystem::path& path);
void WriteMetadata(const std::filesystem::path& path,
                   const MetadataTable& table);

// EMB1 container without normalization. Throws BadMagic or Truncated.
EmbeddingMatrix ReadEmb1(const std::filesystem::path& path);
std::vector<char> EncodeEmb1(const EmbeddingMatrix& matrix);
EmbeddingMatrix DecodeEmb1(std::span<const char> bytes);
void WriteEmb1(const std::filesystem::path& path,
               const EmbeddingMatrix& matrix);

// Reads and L2-normalizes. Throws RowMismatch when the declared row count
// differs from expected_rows.
EmbeddingMatrix LoadEmbeddings(const std::filesystem::path& path,
                               std::size_t expected_rows);

// Logits are left raw. Throws ClassCountMismatch when the sidecar length
// differs from the matrix width.
LogitTable LoadLogits(const std::filesystem::path& path,
                      const std::filesystem::path& classes_path,
                      std::size_t expected_rows);

}  // namespace wildsplit

#endif  // WILDSPLIT_INGEST_H_
