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

#include <gtest/gtest.h>

#include <thread>

#include "test_util.h"
#include "wildsplit/io.h"
#include "wildsplit/quality.h"

namespace wildsplit {
namespace {

using testing::Matrix;
using testing::Rec;
using testing::TempDir;

// Dataset A (dated): x has a tight pair plus an outlier, y one image.
// Dataset B (undated): z has two identical images.
MetadataTable Table(const std::filesystem::path& base) {
  std::vector<ImageRecord> recs = {
      Rec("a0", "A", "x", "2020-01-01"), Rec("a1", "A", "x", "2020-01-02"),
      Rec("a2", "A", "x", "2020-01-05"), Rec("a3", "A", "y", "2020-01-01"),
      Rec("b0", "B", "z"),              Rec("b1", "B", "z")};
  recs[0].path = "img/a0.JPG";
  recs[1].path = "img/missing.png";
  MetadataTable t(std::move(recs));
  t.set_base_dir(base);
  return t;
}

EmbeddingMatrix Embeddings() {
  return Matrix({{1, 0, 0}, {1, 0.05f, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 1, 0}});
}

class SessionTest : public ::testing::Test {
 protected:
  SessionTest()
      : config_(dir_ / "config.json"), session_(Table(dir_.path()), Embeddings(), config_) {}

  TempDir dir_;
  std::filesystem::path config_;
  Session session_;
};

TEST_F(SessionTest, Datasets) {
  const auto r = session_.GetDatasets();
  EXPECT_EQ(r.status, 200);
  ASSERT_EQ(r.body["datasets"].size(), 2u);
  EXPECT_EQ(r.body["datasets"][0]["dataset"], "A");
  EXPECT_EQ(r.body["datasets"][0]["timestamped"], true);
  EXPECT_EQ(r.body["datasets"][1]["timestamped"], false);
  EXPECT_EQ(r.body["datasets"][1]["theta"], 0.97);
}

TEST_F(SessionTest, SweepMatchesQualityModule) {
  const auto r = session_.GetSweep("A");
  ASSERT_EQ(r.status, 200);
  const MetadataTable t = Table(dir_.path());
  const auto graphs = BuildDatasetGraphs(t, "A", Embeddings());
  const auto grid = DefaultThetaGrid();
  const auto points = SweepDataset(t, "A", graphs, grid);
  ASSERT_EQ(r.body["points"].size(), points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    EXPECT_EQ(r.body["points"][k]["theta"], points[k].theta);
    EXPECT_EQ(r.body["points"][k]["tp"], points[k].tp);
    EXPECT_EQ(r.body["points"][k]["fp"], *points[k].fp);
  }
  EXPECT_FALSE(session_.GetSweep("B").body["points"][0].contains("fp"));
  EXPECT_EQ(session_.GetSweep("nope").status, 404);
}

TEST_F(SessionTest, ClustersAtExtremes) {
  const auto high = session_.GetClusters("A", "1");
  ASSERT_EQ(high.status, 200);
  // a0 and a1 are not identical, so nothing merges at theta = 1.
  EXPECT_TRUE(high.body["clusters"].empty());
  EXPECT_EQ(high.body["unclustered"].size(), 4u);

  const auto low = session_.GetClusters("A", "-1");
  ASSERT_EQ(low.body["clusters"].size(), 1u);
  const auto& c = low.body["clusters"][0];
  EXPECT_EQ(c["identity"], "x");
  EXPECT_EQ(c["cluster_id"], "x#0");
  EXPECT_EQ(c["size"], 3);
  EXPECT_EQ(c["dates"], nlohmann::json({"2020-01-01", "2020-01-02", "2020-01-05"}));
  EXPECT_EQ(c["images"][0]["path"], "img/a0.JPG");
  EXPECT_TRUE(c["images"][2]["path"].is_null());
  EXPECT_EQ(low.body["unclustered"][0]["image_id"], "a3");
}

TEST_F(SessionTest, ClustersDefaultToChosenTheta) {
  const auto r = session_.GetClusters("A", std::nullopt);
  EXPECT_EQ(r.body["theta"], 0.97);
  ASSERT_EQ(r.body["clusters"].size(), 1u);
  EXPECT_EQ(r.body["clusters"][0]["size"], 2);
  EXPECT_EQ(r.body["clusters"][0]["images"][1]["image_id"], "a1");
  EXPECT_EQ(session_.GetClusters("B", std::nullopt).body["clusters"][0]["dates"].size(), 0u);
}

TEST_F(SessionTest, BadArguments) {
  for (const char* bad : {"1.5", "-2", "abc", "", "nan", "0.9x"}) {
    const auto r = session_.GetClusters("A", std::string(bad));
    EXPECT_EQ(r.status, 400) << bad;
    EXPECT_EQ(r.body["error"]["code"], "BadConfig");
  }
  const auto r = session_.GetQuality("Q", std::nullopt);
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(r.body["error"]["code"], "UnknownDataset");
}

TEST_F(SessionTest, QualityBodies) {
  const auto a = session_.GetQuality("A", "0.97");
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.body["tp"], 1);
  EXPECT_EQ(a.body["fp"], 1);
  EXPECT_TRUE(a.body.contains("purity"));
  const auto b = session_.GetQuality("B", std::nullopt);
  EXPECT_FALSE(b.body.contains("tp"));
  EXPECT_FALSE(b.body.contains("fp"));
  EXPECT_EQ(b.body["clusters"], 1);
  EXPECT_EQ(b.body["dataset"], "B");
}

TEST_F(SessionTest, ReadsDoNotTouchConfigAndAreDeterministic) {
  const auto first = session_.GetClusters("A", "0.5").body.dump();
  session_.GetQuality("A", std::nullopt);
  session_.GetSweep("B");
  EXPECT_EQ(session_.GetClusters("A", "0.5").body.dump(), first);
  EXPECT_FALSE(std::filesystem::exists(config_));
}

TEST_F(SessionTest, ThresholdPersists) {
  WriteFileAtomic(config_, R"({"train_ratio": 0.8, "per_dataset_theta": {"B": 0.5}})");
  const auto r = session_.PutThreshold(R"({"dataset": "A", "theta": 0.95})");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["config"]["per_dataset_theta"]["A"], 0.95);
  EXPECT_EQ(r.body["config"]["train_ratio"], 0.8);
  const auto loaded = LoadSplitConfig(config_);
  EXPECT_EQ(loaded.ThetaFor("A"), 0.95);
  EXPECT_EQ(loaded.ThetaFor("B"), 0.5);
  EXPECT_EQ(session_.ChosenTheta("A"), 0.95);
  EXPECT_EQ(session_.GetQuality("A", std::nullopt).body["theta"], 0.95);
  EXPECT_EQ(session_.GetQuality("A", std::nullopt).body, session_.GetQuality("A", "0.95").body);

  // A fresh session picks up the file.
  Session again(Table(dir_.path()), Embeddings(), config_);
  EXPECT_EQ(again.ChosenTheta("A"), 0.95);
}

TEST_F(SessionTest, ThresholdRejectsBadBodies) {
  EXPECT_EQ(session_.PutThreshold("not json").status, 400);
  EXPECT_EQ(session_.PutThreshold(R"({"dataset": "A"})").body["error"]["code"], "BadField");
  EXPECT_EQ(session_.PutThreshold(R"({"dataset": "A", "theta": "0.9"})").status, 400);
  EXPECT_EQ(session_.PutThreshold(R"({"dataset": "A", "theta": 2})").body["error"]["code"],
            "BadConfig");
  EXPECT_EQ(session_.PutThreshold(R"({"dataset": "Z", "theta": 0.9})").status, 404);
  EXPECT_FALSE(std::filesystem::exists(config_));
}

TEST_F(SessionTest, Images) {
  std::filesystem::create_directories(dir_ / "img");
  WriteFileAtomic(dir_ / "img/a0.JPG", std::string("\xff\xd8\xff", 3));
  const auto ok = session_.GetImage("a0");
  EXPECT_EQ(ok.status, 200);
  EXPECT_EQ(ok.content_type, "image/jpeg");
  EXPECT_EQ(ok.bytes, std::string("\xff\xd8\xff", 3));
  EXPECT_EQ(session_.GetImage("a1").status, 404);  // file absent
  EXPECT_EQ(session_.GetImage("a2").status, 404);  // no path
  EXPECT_EQ(session_.GetImage("zz").status, 404);
}

TEST_F(SessionTest, ConcurrentReadsAndWrites) {
  std::vector<std::thread> readers;
  std::atomic<int> failures{0};
  for (int i = 0; i < 4; ++i) {
    readers.emplace_back([&] {
      for (int k = 0; k < 50; ++k) {
        const double theta = session_.GetClusters("A", std::nullopt).body["theta"];
        if (theta != 0.97 && theta != 0.9 && theta != 0.8) ++failures;
      }
    });
  }
  for (int k = 0; k < 20; ++k) {
    session_.PutThreshold(k % 2 ? R"({"dataset":"A","theta":0.9})"
                                : R"({"dataset":"A","theta":0.8})");
  }
  for (auto& t : readers) t.join();
  EXPECT_EQ(failures, 0);
  EXPECT_EQ(LoadSplitConfig(config_).ThetaFor("A"), 0.9);
}

TEST(ContentType, ByExtension) {
  EXPECT_EQ(ContentTypeFor("x.png"), "image/png");
  EXPECT_EQ(ContentTypeFor("x.JPEG"), "image/jpeg");
  EXPECT_EQ(ContentTypeFor("x"), "application/octet-stream");
}

}  // namespace
}  // namespace wildsplit
