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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every check runs at full size; nothing here is sampled down.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.h"
#include "test_util.h"
#include "wildsplit/cli.h"
#include "wildsplit/cluster.h"
#include "wildsplit/error.h"
#include "wildsplit/evalkit.h"
#include "wildsplit/io.h"
#include "wildsplit/quality.h"
#include "wildsplit/split.h"
#include "wildsplit/synth.h"

namespace wildsplit {
namespace {

using testing::Rec;
using testing::TempDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string Fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

// Mixed timestamped/untimestamped world for the split criteria.
WorldTruth SplitWorld(std::uint64_t seed) {
  WorldSpec spec;
  spec.seed = seed;
  spec.n_datasets = 3;
  spec.identities_per_dataset = 40;
  spec.mean_images_per_identity = 6;
  spec.mean_encounters_per_identity = 2.5;
  spec.timestamped = {true, false, seed % 2 == 0};
  return GenerateWorld(spec);
}

Outcome Ac1ClusteringOracle() {
  const Stopwatch clock;
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<int> size(1, 30), dims(2, 6), blobs(1, 5);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::uniform_real_distribution<double> theta(-0.2, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = size(gen), d = dims(gen), k = blobs(gen);
    std::vector<std::vector<float>> centers(k, std::vector<float>(d));
    for (auto& c : centers) {
      for (auto& v : c) v = normal(gen);
    }
    std::vector<float> values;
    for (int i = 0; i < n; ++i) {
      const auto& c = centers[i % k];
      for (int j = 0; j < d; ++j) values.push_back(c[j] + 0.3f * normal(gen));
    }
    EmbeddingMatrix emb(n, d, values);
    emb.Normalize();
    std::vector<RowIndex> rows(n);
    for (int i = 0; i < n; ++i) rows[i] = i;
    std::vector<std::vector<double>> sim(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) sim[i][j] = CosineSimilarity(emb.row(i), emb.row(j));
    }
    const double t = theta(gen);
    const auto got = FindClusters(BuildEdges(rows, emb), n, t);
    mismatches += got != oracle::Components(sim, t);
  }
  const double s = clock.seconds();
  return {mismatches == 0 && s < 5.0, Fmt("mismatches=%.0f time=%.2fs", mismatches, s)};
}

std::vector<std::optional<Date>> Dates(const std::vector<std::string>& text) {
  std::vector<std::optional<Date>> out;
  for (const auto& t : text) out.push_back(t.empty() ? std::nullopt : Date::Parse(t));
  return out;
}

Outcome Ac2TpFp() {
  bool ok = true;
  const auto dates = Dates({"2020-01-01", "2020-01-01", "2020-01-01", "2020-01-02",
                            "2020-01-03", "2020-01-04"});
  ok &= ComputeTpFp(std::vector<std::vector<RowIndex>>{{0, 1, 2}, {3, 4}, {5}}, dates) ==
        TpFp{3, 1};
  ok &= ComputeTpFp(std::vector<std::vector<RowIndex>>{{0}, {1}, {2}}, dates) == TpFp{0, 0};
  ok &= ComputeTpFp(std::vector<std::vector<RowIndex>>{{0, 1, 2}}, dates) == TpFp{2, 0};
  const bool hand = ok;

  // Extremes: theta above every similarity and below every similarity.
  bool extremes = true, monotone = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldSpec spec;
    spec.seed = 1000 + seed;
    spec.n_datasets = 2;
    spec.identities_per_dataset = 30;
    spec.mean_images_per_identity = 6;
    spec.mean_encounters_per_identity = 3;
    const WorldTruth w = GenerateWorld(spec);
    for (const std::string& ds : w.table.datasets()) {
      const auto graphs = BuildDatasetGraphs(w.table, ds, w.embeddings);
      std::vector<double> grid = {-1.0};
      for (double g : DefaultThetaGrid()) grid.push_back(g);
      const auto points = SweepDataset(w.table, ds, graphs, grid);
      std::size_t n_minus_1 = 0;
      double max_sim = -1.0;
      for (const auto& g : graphs) {
        n_minus_1 += g.rows.size() - 1;
        for (const auto& e : g.edges) max_sim = std::max(max_sim, e.sim);
      }
      extremes &= points.front().tp == n_minus_1;
      const auto above = SweepDataset(w.table, ds, graphs,
                                      std::vector<double>{std::nextafter(max_sim, 2.0)});
      extremes &= above[0].tp == 0 && above[0].fp.value_or(1) == 0;
      for (std::size_t k = 1; k < points.size(); ++k) {
        monotone &= points[k].tp <= points[k - 1].tp;
        monotone &= points[k].fp.value_or(0) <= points[k - 1].fp.value_or(0);
      }
    }
  }
  return {hand && extremes && monotone,
          Fmt("hand=%.0f extremes=%.0f monotone=%.0f worlds=20", hand, extremes, monotone)};
}

struct SplitCase {
  WorldTruth world;
  SplitConfig config;
  SplitResult result;
};

const std::vector<SplitCase>& SplitCases() {
  static const std::vector<SplitCase> cases = [] {
    std::vector<SplitCase> out;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      SplitCase c{SplitWorld(seed), SplitConfig{}, {}};
      c.config.seed = seed;
      c.result = BuildSplit(c.world.table, c.world.embeddings, c.config);
      out.push_back(std::move(c));
    }
    return out;
  }();
  return cases;
}

Outcome Ac3Verify() {
  const Stopwatch clock;
  std::size_t total = 0, worlds = 0, time_routed = 0, sim_routed = 0;
  for (const SplitCase& c : SplitCases()) {
    const auto report = VerifySplit(c.world.table, c.world.embeddings, c.result.assignment,
                                    c.config);
    total += report.total();
    ++worlds;
    for (const std::string& ds : c.world.table.datasets()) {
      (c.config.UsesTimeSplit(c.world.table, ds) ? time_routed : sim_routed) += 1;
    }
  }
  const double s = clock.seconds();
  return {total == 0 && worlds == 50 && time_routed > 0 && sim_routed > 0 && s < 30.0,
          Fmt("violations=%.0f worlds=%.0f time_routed=%.0f time=%.2fs", total, worlds,
              time_routed, s)};
}

Outcome Ac4TimeAware() {
  std::size_t checked = 0, bad = 0;
  for (const SplitCase& c : SplitCases()) {
    const auto& t = c.world.table;
    for (const std::string& ds : t.datasets()) {
      if (!c.config.UsesTimeSplit(t, ds)) continue;
      for (const IdentityKey& key : t.identities_of_dataset(ds)) {
        std::set<Date> train, test;
        for (RowIndex r : t.rows_of_identity(key)) {
          (c.result.assignment.labels[r] == SplitLabel::kTrain ? train : test).insert(*t[r].date);
        }
        if (test.empty()) continue;
        ++checked;
        if (!train.empty() && !(*train.rbegin() < *test.begin())) ++bad;
        for (const Date& d : train) bad += test.count(d);
      }
    }
  }
  return {bad == 0 && checked > 0, Fmt("identities=%.0f violations=%.0f", checked, bad)};
}

Outcome Ac5SimilarityAware() {
  std::size_t checked = 0, bad = 0;
  for (const SplitCase& c : SplitCases()) {
    const auto& t = c.world.table;
    const auto& labels = c.result.assignment.labels;
    for (const std::string& ds : t.datasets()) {
      if (c.config.UsesTimeSplit(t, ds)) continue;
      const double theta = c.config.ThetaFor(ds);
      for (const IdentityKey& key : t.identities_of_dataset(ds)) {
        const auto& rows = t.rows_of_identity(key);
        for (RowIndex q : rows) {
          if (labels[q] != SplitLabel::kTestKnown) continue;
          ++checked;
          double best = -2.0;
          for (RowIndex g : rows) {
            if (labels[g] == SplitLabel::kTrain) {
              best = std::max(best, CosineSimilarity(c.world.embeddings.row(q),
                                                     c.world.embeddings.row(g)));
            }
          }
          bad += !(best < theta);
        }
      }
    }
  }
  return {bad == 0 && checked > 0, Fmt("test_known=%.0f violations=%.0f", checked, bad)};
}

// Untimestamped world where identities are hard to tell apart across
// encounters but images within an encounter are near-duplicates.
WorldTruth InflationWorld(std::uint64_t seed) {
  WorldSpec spec;
  spec.seed = seed;
  spec.n_datasets = 2;
  spec.identities_per_dataset = 120;
  spec.mean_images_per_identity = 12;
  spec.mean_encounters_per_identity = 3;
  spec.identity_spread = 0.2;
  spec.encounter_spread = 0.19;
  spec.image_noise = 0.01;
  spec.timestamped = {false, false};
  return GenerateWorld(spec);
}

// The scorer sees the world's embeddings through its own per-image noise.
EmbeddingMatrix ScorerView(const EmbeddingMatrix& clean, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> normal(0.0f, 0.01f);
  std::vector<float> values = clean.values();
  for (auto& v : values) v += normal(gen);
  EmbeddingMatrix out(clean.rows(), clean.dims(), std::move(values));
  out.Normalize();
  return out;
}

Outcome Ac6LeakageInflation() {
  const Stopwatch clock;
  int direction = 0, margin = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const WorldTruth w = InflationWorld(seed);
    SplitConfig config;
    config.seed = seed;
    const SplitResult sim = BuildSplit(w.table, w.embeddings, config);
    const SplitAssignment rnd = RandomSplit(w.table, sim.assignment, seed);
    const EmbeddingMatrix view = ScorerView(w.embeddings, 77 + seed);
    auto score = [&](const SplitAssignment& split) {
      const auto scored = ScoreTestImages(w.table, split, Scorer::kKnn, &view, nullptr);
      return Evaluate(scored, w.table, split, std::nullopt, "knn");
    };
    const MetricReport a = score(sim.assignment), b = score(rnd);
    const double gap = b.closed.top1 - a.closed.top1;
    const bool dir = gap > 0 && b.curve->area > a.curve->area;
    direction += dir;
    margin += gap >= 0.10;
    detail += Fmt(" [mtop1 %.3f->%.3f area %.3f->%.3f]", a.closed.top1, b.closed.top1,
                  a.curve->area, b.curve->area);
  }
  const double s = clock.seconds();
  return {direction == 5 && margin >= 3 && s < 60.0,
          Fmt("direction=%.0f/5 margin10pp=%.0f/5 time=%.2fs", direction, margin, s) + detail};
}

Outcome Ac7MetricOracles() {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> size(1, 200);
  double worst_auroc = 0.0;
  int tnr_mismatch = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::uniform_int_distribution<int> level(0, 1 + trial % 25);
    std::vector<double> k(size(gen)), f(size(gen));
    for (auto& x : k) x = level(gen) * 0.04;
    for (auto& x : f) x = level(gen) * 0.04 - 0.02 * (trial % 2);
    worst_auroc = std::max(worst_auroc, std::abs(Auroc(k, f) - oracle::PairwiseAuroc(k, f)));
    tnr_mismatch += TnrAtTpr(k, f, 0.95) != oracle::ExhaustiveTnr(k, f, 0.95);
  }

  // Hand values. D1: class a 2/2, class b 0/1; D2: class c 3/3.
  const MetadataTable t({Rec("a0", "D1", "a"), Rec("a1", "D1", "a"), Rec("a2", "D1", "a"),
                         Rec("b0", "D1", "b"), Rec("b1", "D1", "b"), Rec("c0", "D2", "c"),
                         Rec("c1", "D2", "c"), Rec("c2", "D2", "c"), Rec("c3", "D2", "c"),
                         Rec("u0", "D2", "u"), Rec("u1", "D2", "u")});
  SplitAssignment split;
  using L = SplitLabel;
  split.labels = {L::kTrain, L::kTestKnown, L::kTestKnown, L::kTrain, L::kTestKnown, L::kTrain,
                  L::kTestKnown, L::kTestKnown, L::kTestKnown, L::kTestNew, L::kTestNew};
  split.provenance.assign(split.labels.size(), Provenance::kLoaded);
  auto pred = [](RowIndex r, std::string ds, std::string id, double t) {
    Prediction p;
    p.row = r;
    p.identity = IdentityKey{ds, id};
    p.top5 = {*p.identity};
    p.confidence = t;
    return p;
  };
  const std::vector<Prediction> scored = {
      pred(1, "D1", "a", 0.9), pred(2, "D1", "a", 0.9), pred(4, "D1", "a", 0.9),
      pred(6, "D2", "c", 0.9), pred(7, "D2", "c", 0.9), pred(8, "D2", "c", 0.9),
      pred(9, "D2", "c", 0.2), pred(10, "D2", "c", 0.6)};
  const auto closed = ComputeClosedMetrics(scored, t, split);
  std::vector<Prediction> open;
  for (const auto& p : scored) open.push_back(PredictOpenSet(p, 0.5));
  const auto baus = ComputeBaus(open, t, split);
  const bool hand = closed.baks == 0.75 && std::abs(closed.top1 - 5.0 / 6.0) < 1e-15 &&
                    baus.macro && *baus.macro == 0.5 &&
                    NormalizedAccuracy(0.81, 0.49) == std::sqrt(0.81 * 0.49) &&
                    std::abs(NormalizedAccuracy(0.81, 0.49) - 0.63) < 1e-15 &&
                    Auroc(std::vector<double>{0.9, 0.2}, std::vector<double>{0.5}) == 0.5 &&
                    TnrAtTpr(std::vector<double>{0.9, 0.8, 0.7, 0.6},
                             std::vector<double>{0.65, 0.3}) == 0.5;
  const bool degenerate = NormalizedAccuracy(0.0, 1.0) == 0.0;
  return {worst_auroc <= 1e-9 && tnr_mismatch == 0 && hand && degenerate,
          Fmt("auroc_max_err=%.1e tnr_mismatch=%.0f hand=%.0f norm(0,1)=0:%.0f", worst_auroc,
              tnr_mismatch, hand, degenerate)};
}

Outcome Ac8EncounterRecovery() {
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    WorldSpec spec;
    spec.seed = 5000 + seed;
    const WorldTruth w = GenerateWorld(spec);
    const double theta = OracleTheta(w);
    bool all = true;
    for (const IdentityKey& key : w.table.identities()) {
      all &= ClusterIdentity(w.table, key, w.embeddings, theta).clusters ==
             TrueEncounters(w, key);
    }
    recovered += all;
  }
  return {recovered == 50, Fmt("recovered=%.0f/50", recovered)};
}

int Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  return RunCli(args, out, err);
}

Outcome Ac9Determinism() {
  TempDir dir;
  WorldSpec spec;
  spec.seed = 9;
  spec.n_datasets = 3;
  spec.identities_per_dataset = 60;
  spec.mean_images_per_identity = 8;
  spec.timestamped = {true, false, false};
  WriteWorld(dir / "w", GenerateWorld(spec));
  const std::string meta = (dir / "w/metadata.csv").string();
  const std::string emb = (dir / "w/embeddings.emb1").string();
  std::vector<std::string> files;
  for (const char* threads : {"1", "2", "4", "7"}) {
    const auto sub = dir / (std::string("t") + threads);
    std::filesystem::create_directories(sub);
    const std::string split = (sub / "split.csv").string();
    int code = Cli({"split", "--metadata", meta, "--embeddings", emb, "--seed", "3",
                    "--threads", threads, "--out", split, "--clusters",
                    (sub / "clusters.csv").string()});
    for (const char* scorer : {"knn", "nms"}) {
      code |= Cli({"eval", "--metadata", meta, "--split", split, "--embeddings", emb,
                   "--scorer", scorer, "--t-new", "0.8", "--threads", threads, "--out",
                   (sub / (std::string(scorer) + ".json")).string()});
    }
    if (code != 0) return {false, "command failed"};
    std::string all;
    for (const char* f : {"split.csv", "split.csv.summary.json", "split.csv.manifest.json",
                          "clusters.csv", "knn.json", "knn.json.manifest.json", "nms.json",
                          "nms.json.manifest.json"}) {
      all += Sha256File(sub / f);
    }
    files.push_back(all);
  }
  const bool same = std::all_of(files.begin(), files.end(),
                                [&](const std::string& f) { return f == files.front(); });
  return {same, "threads=1,2,4,7 files=8 identical=" + std::string(same ? "yes" : "no")};
}

template <typename F>
std::optional<ErrorCode> CodeOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

Outcome Ac10Formats() {
  std::mt19937_64 gen(10);
  std::vector<float> values = {0.0f, -0.0f, 1e-45f, -1e-40f, 3.4028235e38f, -1.0f};
  std::uniform_int_distribution<std::uint32_t> bits;
  while (values.size() < 37 * 11) {
    const std::uint32_t b = bits(gen);
    float v;
    std::memcpy(&v, &b, sizeof v);
    if (std::isfinite(v)) values.push_back(v);
  }
  TempDir dir;
  const EmbeddingMatrix m(37, 11, values);
  WriteEmb1(dir / "m.emb1", m);
  const EmbeddingMatrix back = ReadEmb1(dir / "m.emb1");
  const bool exact = back.rows() == 37 && back.dims() == 11 &&
                     std::memcmp(back.values().data(), values.data(),
                                 values.size() * sizeof(float)) == 0 &&
                     EncodeEmb1(back) == EncodeEmb1(m);

  const std::string header = "image_id,dataset,identity,date,path\n";
  std::vector<std::pair<std::string, std::optional<ErrorCode>>> got;
  got.emplace_back("DuplicateId", CodeOf([&] { ParseMetadata(header + "x,A,a,,\nx,A,b,,\n"); }));
  got.emplace_back("BadDate", CodeOf([&] { ParseMetadata(header + "x,A,a,2021-02-30,\n"); }));
  WriteEmb1(dir / "five.emb1", EmbeddingMatrix(5, 2, std::vector<float>(10, 1.0f)));
  got.emplace_back("RowMismatch", CodeOf([&] { LoadEmbeddings(dir / "five.emb1", 4); }));
  auto bytes = EncodeEmb1(EmbeddingMatrix(3, 2, std::vector<float>(6, 1.0f)));
  bytes.resize(bytes.size() - 3);
  WriteBytesAtomic(dir / "cut.emb1", bytes);
  got.emplace_back("Truncated", CodeOf([&] { ReadEmb1(dir / "cut.emb1"); }));
  WriteEmb1(dir / "zero.emb1", EmbeddingMatrix(2, 2, {0.5f, 0.5f, 0.0f, 0.0f}));
  got.emplace_back("ZeroVector", CodeOf([&] { LoadEmbeddings(dir / "zero.emb1", 2); }));

  bool errors = true;
  std::string detail = std::string("roundtrip=") + (exact ? "exact" : "DIFF");
  for (const auto& [name, code] : got) {
    const bool match = code && ErrorCodeName(*code) == name;
    errors &= match;
    detail += " " + name + (match ? "=ok" : "=MISSING");
  }
  return {exact && errors, detail};
}

}  // namespace
}  // namespace wildsplit

int main() {
  using wildsplit::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"clustering equals brute-force components", wildsplit::Ac1ClusteringOracle},
      {"tp/fp hand cases, extremes, monotone sweep", wildsplit::Ac2TpFp},
      {"split passes all four leakage checks", wildsplit::Ac3Verify},
      {"time-aware dates strictly separated", wildsplit::Ac4TimeAware},
      {"similarity-aware test_known below theta", wildsplit::Ac5SimilarityAware},
      {"random split inflates closed and open-set scores", wildsplit::Ac6LeakageInflation},
      {"metric oracles and hand values", wildsplit::Ac7MetricOracles},
      {"encounter recovery at oracle theta", wildsplit::Ac8EncounterRecovery},
      {"byte-identical split/eval across threads", wildsplit::Ac9Determinism},
      {"EMB1 round trip and parser errors", wildsplit::Ac10Formats},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "AC" << (k + 1) << " " << (o.pass ? "PASS" : "FAIL") << "  "
              << criteria[k].first << "  (" << o.detail << ")" << std::endl;
  }
  std::cout << (failed == 0 ? "ALL PASS" : "FAILURES: " + std::to_string(failed)) << std::endl;
  return failed == 0 ? 0 : 1;
}
