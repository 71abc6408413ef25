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

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include <gtest/gtest.h>

#include "test_util.h"
#include "wildsplit/error.h"
#include "wildsplit/io.h"

namespace wildsplit {
namespace {

using testing::Rec;
using testing::TempDir;

template <typename Fn>
ErrorCode CodeOf(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

std::string MessageOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

constexpr char kHeader[] = "image_id,dataset,identity,date,path\n";

TEST(Date, ParsesAndFormats) {
  const auto d = Date::Parse("2021-03-04");
  ASSERT_TRUE(d);
  EXPECT_EQ(d->ToString(), "2021-03-04");
  EXPECT_EQ(Date::Parse("1970-01-01")->days(), 0);
  EXPECT_LT(*Date::Parse("2020-12-31"), *Date::Parse("2021-01-01"));
}

TEST(Date, RejectsMalformed) {
  for (const char* bad : {"2021-3-04", "2021-02-30", "2021-13-01", "21-03-04",
                          "2021/03/04", "2021-03-04T00", "", "abcd-ef-gh"}) {
    EXPECT_FALSE(Date::Parse(bad)) << bad;
  }
  EXPECT_TRUE(Date::Parse("2020-02-29"));
}

TEST(ParseMetadata, WellFormedKeepsRowOrder) {
  const auto t = ParseMetadata(std::string(kHeader) +
                               "c,A,x,2020-01-01,img/c.jpg\n"
                               "a,A,y,2020-01-02,\n"
                               "b,B,x,,\n");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0].image_id, "c");
  EXPECT_EQ(t[1].image_id, "a");
  EXPECT_EQ(t[2].image_id, "b");
  EXPECT_EQ(*t[0].path, "img/c.jpg");
  EXPECT_FALSE(t[1].path);
  EXPECT_FALSE(t[2].date);
  EXPECT_EQ(t.datasets(), (std::vector<std::string>{"A", "B"}));
  EXPECT_TRUE(t.is_timestamped("A"));
  EXPECT_FALSE(t.is_timestamped("B"));
  EXPECT_EQ(t.rows_of_identity({"A", "x"}), std::vector<RowIndex>{0});
  EXPECT_EQ(*t.find_image("b"), 2u);
  EXPECT_FALSE(t.find_image("zz"));
}

TEST(ParseMetadata, HeaderColumnsInAnyOrderAndCrlf) {
  const auto t = ParseMetadata("path,date,identity,dataset,image_id\r\n,2020-01-01,x,A,i1\r\n\n");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].image_id, "i1");
  EXPECT_EQ(t[0].dataset, "A");
}

TEST(ParseMetadata, PartialDatesMakeDatasetUntimestamped) {
  const auto t = ParseMetadata(std::string(kHeader) +
                               "1,A,x,2020-01-01,\n2,A,x,2020-01-02,\n3,A,y,,\n");
  EXPECT_FALSE(t.is_timestamped("A"));
}

TEST(ParseMetadata, DuplicateIdNamesTheId) {
  auto fn = [] { ParseMetadata(std::string(kHeader) + "x1,A,a,,\nx1,A,b,,\n"); };
  EXPECT_EQ(CodeOf(fn), ErrorCode::kDuplicateId);
  EXPECT_NE(MessageOf(fn).find("x1"), std::string::npos);
}

TEST(ParseMetadata, BadDateNamesTheRow) {
  auto fn = [] { ParseMetadata(std::string(kHeader) + "1,A,a,2020-01-01,\n2,A,a,2020-02-31,\n"); };
  EXPECT_EQ(CodeOf(fn), ErrorCode::kBadDate);
  EXPECT_NE(MessageOf(fn).find("row 1"), std::string::npos);
}

TEST(ParseMetadata, FieldAndHeaderErrors) {
  EXPECT_EQ(CodeOf([] { ParseMetadata(std::string(kHeader) + "1,A,,,\n"); }),
            ErrorCode::kBadField);
  EXPECT_EQ(CodeOf([] { ParseMetadata(std::string(kHeader) + "1,,a,,\n"); }),
            ErrorCode::kBadField);
  EXPECT_EQ(CodeOf([] { ParseMetadata(std::string(kHeader) + "1,A,a\n"); }),
            ErrorCode::kBadField);
  EXPECT_EQ(CodeOf([] { ParseMetadata("image_id,dataset,identity,path\n1,A,a,\n"); }),
            ErrorCode::kBadHeader);
  EXPECT_EQ(CodeOf([] { ParseMetadata(""); }), ErrorCode::kBadHeader);
}

TEST(MetadataTable, UnknownLookupsThrow) {
  MetadataTable t({Rec("1", "A", "a")});
  EXPECT_EQ(CodeOf([&] { t.rows_of_dataset("B"); }), ErrorCode::kUnknownDataset);
  EXPECT_EQ(CodeOf([&] { t.rows_of_identity({"A", "b"}); }), ErrorCode::kUnknownIdentity);
}

TEST(Metadata, WriteThenLoadRoundTrips) {
  TempDir dir;
  auto rec = Rec("i1", "A", "x", "2021-05-06");
  rec.path = "p/i1.png";
  MetadataTable t({rec, Rec("i2", "B", "y")});
  WriteMetadata(dir / "m.csv", t);
  const auto back = LoadMetadata(dir / "m.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].date->ToString(), "2021-05-06");
  EXPECT_EQ(*back[0].path, "p/i1.png");
  EXPECT_FALSE(back[1].date);
  EXPECT_EQ(back.base_dir(), dir.path());
}

TEST(Emb1, RoundTripIsBitExact) {
  TempDir dir;
  std::vector<float> values = {1.0f, -0.0f, std::numeric_limits<float>::denorm_min(),
                               3.4028235e38f, 1e-20f, -7.25f};
  EmbeddingMatrix m(2, 3, values);
  WriteEmb1(dir / "e.emb1", m);
  const auto back = ReadEmb1(dir / "e.emb1");
  ASSERT_EQ(back.rows(), 2u);
  ASSERT_EQ(back.dims(), 3u);
  for (std::size_t i = 0; i < values.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.values()[i]),
              std::bit_cast<std::uint32_t>(values[i]));
  }
  EXPECT_FALSE(back.normalized());
}

TEST(Emb1, LayoutIsLittleEndian) {
  EmbeddingMatrix m(1, 1, {1.0f});
  const auto bytes = EncodeEmb1(m);
  ASSERT_EQ(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.data(), 4), "EMB1");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 1);
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[14]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(bytes[15]), 0x3f);
}

TEST(Emb1, Errors) {
  auto bytes = EncodeEmb1(EmbeddingMatrix(2, 2, {1, 2, 3, 4}));
  auto decode = [](std::vector<char> b) { DecodeEmb1(b); };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(CodeOf([&] { decode(bad_magic); }), ErrorCode::kBadMagic);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_EQ(CodeOf([&] { decode(truncated); }), ErrorCode::kTruncated);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_EQ(CodeOf([&] { decode(extra); }), ErrorCode::kTruncated);
  EXPECT_EQ(CodeOf([&] { decode({'E', 'M'}); }), ErrorCode::kTruncated);
  EXPECT_EQ(CodeOf([&] { decode({'E', 'M', 'B', '1', 0}); }), ErrorCode::kTruncated);
}

TEST(LoadEmbeddings, NormalizesRows) {
  TempDir dir;
  WriteEmb1(dir / "e.emb1", EmbeddingMatrix(2, 3, {1, 0, 0, 0, 2, 0}));
  const auto m = LoadEmbeddings(dir / "e.emb1", 2);
  EXPECT_TRUE(m.normalized());
  EXPECT_EQ(m.values(), (std::vector<float>{1, 0, 0, 0, 1, 0}));
}

TEST(LoadEmbeddings, RowMismatchAndZeroVector) {
  TempDir dir;
  WriteEmb1(dir / "five.emb1", EmbeddingMatrix(5, 1, {1, 1, 1, 1, 1}));
  EXPECT_EQ(CodeOf([&] { LoadEmbeddings(dir / "five.emb1", 4); }), ErrorCode::kRowMismatch);
  WriteEmb1(dir / "zero.emb1", EmbeddingMatrix(2, 2, {1, 0, 0, 0}));
  auto fn = [&] { LoadEmbeddings(dir / "zero.emb1", 2); };
  EXPECT_EQ(CodeOf(fn), ErrorCode::kZeroVector);
  EXPECT_NE(MessageOf(fn).find("1"), std::string::npos);
}

TEST(LoadEmbeddings, NormalizedRowsHaveUnitNorm) {
  TempDir dir;
  std::vector<float> v;
  for (int i = 0; i < 64 * 10; ++i) v.push_back(static_cast<float>(std::sin(i * 1.7) * 100.0));
  WriteEmb1(dir / "e.emb1", EmbeddingMatrix(10, 64, v));
  const auto m = LoadEmbeddings(dir / "e.emb1", 10);
  for (std::size_t r = 0; r < 10; ++r) {
    double n = 0;
    for (float x : m.row(r)) n += static_cast<double>(x) * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-5);
  }
}

TEST(LoadLogits, RawAndAligned) {
  TempDir dir;
  WriteEmb1(dir / "l.emb1", EmbeddingMatrix(2, 3, {2, 0, 0, 1, 1, 1}));
  WriteFileAtomic(dir / "c.json", R"(["a","b","c"])");
  const auto t = LoadLogits(dir / "l.emb1", dir / "c.json", 2);
  EXPECT_EQ(t.classes, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(t.logits.row(0)[0], 2.0f);
  EXPECT_FALSE(t.logits.normalized());
}

TEST(LoadLogits, ClassCountMismatch) {
  TempDir dir;
  WriteEmb1(dir / "l.emb1", EmbeddingMatrix(2, 3, {2, 0, 0, 1, 1, 1}));
  WriteFileAtomic(dir / "c.json", R"(["a","b"])");
  EXPECT_EQ(CodeOf([&] { LoadLogits(dir / "l.emb1", dir / "c.json", 2); }),
            ErrorCode::kClassCountMismatch);
  WriteFileAtomic(dir / "bad.json", R"({"a":1})");
  EXPECT_EQ(CodeOf([&] { LoadLogits(dir / "l.emb1", dir / "bad.json", 2); }),
            ErrorCode::kBadField);
}

}  // namespace
}  // namespace wildsplit
