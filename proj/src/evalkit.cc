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

#include "wildsplit/evalkit.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wildsplit/cluster.h"
#include "wildsplit/error.h"
#include "wildsplit/parallel.h"

namespace wildsplit {

// ---------------------------------------------------------------------------
// Scorers

Gallery::Gallery(const MetadataTable& table, const SplitAssignment& split,
                 std::string_view dataset) {
  std::map<IdentityKey, std::size_t> index;
  for (RowIndex row : table.rows_of_dataset(dataset)) {
    if (split.labels[row] != SplitLabel::kTrain) continue;
    rows_.push_back(row);
    const IdentityKey key = table[row].key();
    index.emplace(key, 0);
  }
  for (auto& [key, idx] : index) {
    idx = identities_.size();
    identities_.push_back(key);
  }
  identity_of_row_.reserve(rows_.size());
  for (RowIndex row : rows_) identity_of_row_.push_back(index.at(table[row].key()));
}

namespace {

struct Ranked {
  std::size_t identity;
  double score;
  std::size_t tie;  // lower wins on equal score
};

std::vector<std::size_t> TopK(std::vector<Ranked> ranked, std::size_t k) {
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tie < b.tie;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].identity);
  return out;
}

}  // namespace

Prediction KnnPredict(RowIndex test_row, const Gallery& gallery,
                      const EmbeddingMatrix& embeddings) {
  if (gallery.empty()) {
    throw Error(ErrorCode::kEmptyGallery,
                "no train images to match row " + std::to_string(test_row));
  }
  const auto query = embeddings.row(test_row);
  std::vector<double> best(gallery.identities().size(),
                           -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> best_pos(gallery.identities().size(), 0);
  for (std::size_t p = 0; p < gallery.rows().size(); ++p) {
    const double sim = CosineSimilarity(query, embeddings.row(gallery.rows()[p]));
    const std::size_t id = gallery.identity_of_row()[p];
    // Rows are ascending, so strict > keeps the lowest row on ties.
    if (sim > best[id]) {
      best[id] = sim;
      best_pos[id] = p;
    }
  }
  std::vector<Ranked> ranked;
  ranked.reserve(best.size());
  for (std::size_t id = 0; id < best.size(); ++id) {
    ranked.push_back({id, best[id], best_pos[id]});
  }
  const auto top = TopK(std::move(ranked), 5);
  Prediction out;
  out.row = test_row;
  out.identity = gallery.identities()[top.front()];
  out.confidence = best[top.front()];
  for (std::size_t id : top) out.top5.push_back(gallery.identities()[id]);
  return out;
}

Centroids BuildCentroids(const Gallery& gallery, const EmbeddingMatrix& embeddings) {
  if (gallery.empty()) throw Error(ErrorCode::kEmptyGallery, "no train images");
  Centroids out;
  out.identities = gallery.identities();
  out.vectors.assign(out.identities.size(),
                     std::vector<double>(embeddings.dims(), 0.0));
  for (std::size_t p = 0; p < gallery.rows().size(); ++p) {
    auto& acc = out.vectors[gallery.identity_of_row()[p]];
    const auto v = embeddings.row(gallery.rows()[p]);
    for (std::size_t k = 0; k < v.size(); ++k) acc[k] += v[k];
  }
  for (std::size_t id = 0; id < out.vectors.size(); ++id) {
    auto& acc = out.vectors[id];
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm >= 1e-9)) {
      throw Error(ErrorCode::kDegenerateCentroid,
                  "embeddings of identity '" + out.identities[id].identity +
                      "' sum to zero");
    }
    for (double& x : acc) x /= norm;
  }
  return out;
}

Prediction NmsPredict(RowIndex test_row, const Centroids& centroids,
                      const EmbeddingMatrix& embeddings) {
  if (centroids.identities.empty()) throw Error(ErrorCode::kEmptyGallery, "no centroids");
  const auto query = embeddings.row(test_row);
  std::vector<Ranked> ranked;
  ranked.reserve(centroids.vectors.size());
  for (std::size_t id = 0; id < centroids.vectors.size(); ++id) {
    const auto& c = centroids.vectors[id];
    if (c.size() != query.size()) throw Error(ErrorCode::kDimMismatch, "centroid width");
    double dot = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) dot += query[k] * c[k];
    ranked.push_back({id, std::clamp(dot, -1.0, 1.0), id});
  }
  const double best = std::max_element(ranked.begin(), ranked.end(),
                                       [](const Ranked& a, const Ranked& b) {
                                         return a.score < b.score;
                                       })->score;
  const auto top = TopK(std::move(ranked), 5);
  Prediction out;
  out.row = test_row;
  out.identity = centroids.identities[top.front()];
  out.confidence = best;
  for (std::size_t id : top) out.top5.push_back(centroids.identities[id]);
  return out;
}

namespace {

std::size_t ArgMax(std::span<const float> logits) {
  if (logits.empty()) throw Error(ErrorCode::kBadLogits, "empty logit row");
  std::size_t best = 0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (!std::isfinite(logits[k])) {
      throw Error(ErrorCode::kBadLogits, "non-finite logit at column " + std::to_string(k));
    }
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

}  // namespace

LogitScore MspScore(std::span<const float> logits) {
  const std::size_t cls = ArgMax(logits);
  const double top = logits[cls];
  double denom = 0.0;
  for (float x : logits) denom += std::exp(static_cast<double>(x) - top);
  return {cls, 1.0 / denom};
}

LogitScore MlsScore(std::span<const float> logits) {
  const std::size_t cls = ArgMax(logits);
  return {cls, static_cast<double>(logits[cls])};
}

std::optional<Scorer> ParseScorer(std::string_view name) {
  if (name == "knn") return Scorer::kKnn;
  if (name == "nms") return Scorer::kNms;
  if (name == "msp") return Scorer::kMsp;
  if (name == "mls") return Scorer::kMls;
  return std::nullopt;
}

std::string_view ScorerName(Scorer scorer) {
  switch (scorer) {
    case Scorer::kKnn: return "knn";
    case Scorer::kNms: return "nms";
    case Scorer::kMsp: return "msp";
    case Scorer::kMls: return "mls";
  }
  return "?";
}

Prediction LogitPredict(RowIndex test_row, const MetadataTable& table,
                        const LogitTable& logits, Scorer scorer) {
  const auto row = logits.logits.row(test_row);
  const LogitScore score = scorer == Scorer::kMsp ? MspScore(row) : MlsScore(row);
  std::vector<Ranked> ranked;
  ranked.reserve(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) ranked.push_back({k, row[k], k});
  const std::string& dataset = table[test_row].dataset;
  Prediction out;
  out.row = test_row;
  out.identity = IdentityKey{dataset, logits.classes[score.cls]};
  out.confidence = score.t;
  for (std::size_t k : TopK(std::move(ranked), 5)) {
    out.top5.push_back({dataset, logits.classes[k]});
  }
  return out;
}

Prediction PredictOpenSet(Prediction prediction, double t_new) {
  if (!(prediction.confidence >= t_new)) prediction.identity.reset();
  return prediction;
}

std::vector<Prediction> ScoreTestImages(const MetadataTable& table,
                                        const SplitAssignment& split,
                                        Scorer scorer,
                                        const EmbeddingMatrix* embeddings,
                                        const LogitTable* logits,
                                        std::size_t threads) {
  if (split.size() != table.size()) {
    throw Error(ErrorCode::kRowMismatch, "split does not match metadata rows");
  }
  const bool needs_embeddings = scorer == Scorer::kKnn || scorer == Scorer::kNms;
  if (needs_embeddings && (embeddings == nullptr || embeddings->rows() != table.size())) {
    throw Error(ErrorCode::kRowMismatch, "scorer needs embeddings aligned with metadata");
  }
  if (!needs_embeddings && (logits == nullptr || logits->logits.rows() != table.size())) {
    throw Error(ErrorCode::kRowMismatch, "scorer needs logits aligned with metadata");
  }

  std::vector<RowIndex> tests;
  std::map<std::string, std::size_t> dataset_index;
  std::vector<Gallery> galleries;
  std::vector<std::optional<Centroids>> centroids;
  for (const std::string& dataset : table.datasets()) {
    dataset_index[dataset] = galleries.size();
    galleries.emplace_back(table, split, dataset);
    centroids.emplace_back();
  }
  for (RowIndex row = 0; row < table.size(); ++row) {
    if (split.labels[row] != SplitLabel::kTrain) tests.push_back(row);
  }
  if (scorer == Scorer::kNms) {
    for (std::size_t d = 0; d < galleries.size(); ++d) {
      if (!galleries[d].empty()) centroids[d] = BuildCentroids(galleries[d], *embeddings);
    }
  }

  std::vector<Prediction> out(tests.size());
  ParallelFor(tests.size(), threads, [&](std::size_t i) {
    const RowIndex row = tests[i];
    const std::size_t d = dataset_index.at(table[row].dataset);
    switch (scorer) {
      case Scorer::kKnn:
        out[i] = KnnPredict(row, galleries[d], *embeddings);
        break;
      case Scorer::kNms:
        if (!centroids[d]) {
          throw Error(ErrorCode::kEmptyGallery,
                      "dataset '" + table[row].dataset + "' has no train images");
        }
        out[i] = NmsPredict(row, *centroids[d], *embeddings);
        break;
      case Scorer::kMsp:
      case Scorer::kMls:
        out[i] = LogitPredict(row, table, *logits, scorer);
        break;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

std::vector<const Prediction*> IndexByRow(std::span<const Prediction> predictions,
                                          std::size_t rows) {
  std::vector<const Prediction*> index(rows, nullptr);
  for (const Prediction& p : predictions) {
    if (p.row < rows) index[p.row] = &p;
  }
  return index;
}

// Per-class (hits, total) in class-key order -> mean of hit rates. Shared by
// the direct metrics and the curve sweep so both sum in the same order.
double MeanClassRate(const std::map<std::string, std::pair<std::size_t, std::size_t>>& classes) {
  double sum = 0.0;
  for (const auto& [name, counts] : classes) {
    sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return sum / static_cast<double>(classes.size());
}

double MeanOf(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

const Prediction& RequirePrediction(const std::vector<const Prediction*>& index,
                                    const MetadataTable& table, RowIndex row) {
  if (index[row] == nullptr) {
    throw Error(ErrorCode::kIncomplete,
                "no prediction for test image '" + table[row].image_id + "'");
  }
  return *index[row];
}

}  // namespace

ClosedMetrics ComputeClosedMetrics(std::span<const Prediction> predictions,
                                   const MetadataTable& table,
                                   const SplitAssignment& split) {
  const auto index = IndexByRow(predictions, table.size());
  ClosedMetrics out;
  std::vector<double> top1s, top5s, bakss;
  for (const std::string& dataset : table.datasets()) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> classes;
    std::size_t images = 0, hits1 = 0, hits5 = 0;
    for (RowIndex row : table.rows_of_dataset(dataset)) {
      if (split.labels[row] != SplitLabel::kTestKnown) continue;
      const Prediction& p = RequirePrediction(index, table, row);
      const IdentityKey truth = table[row].key();
      const bool hit = p.identity && *p.identity == truth;
      const bool hit5 = std::find(p.top5.begin(), p.top5.end(), truth) != p.top5.end();
      ++images;
      hits1 += hit;
      hits5 += hit5;
      auto& c = classes[truth.identity];
      c.first += hit;
      ++c.second;
    }
    if (images == 0) continue;
    DatasetClosed d;
    d.images = images;
    d.classes = classes.size();
    d.top1 = static_cast<double>(hits1) / static_cast<double>(images);
    d.top5 = static_cast<double>(hits5) / static_cast<double>(images);
    d.baks = MeanClassRate(classes);
    top1s.push_back(d.top1);
    top5s.push_back(d.top5);
    bakss.push_back(d.baks);
    out.per_dataset[dataset] = d;
  }
  if (out.per_dataset.empty()) {
    throw Error(ErrorCode::kUndefined, "no test_known images to evaluate");
  }
  out.top1 = MeanOf(top1s);
  out.top5 = MeanOf(top5s);
  out.baks = MeanOf(bakss);
  return out;
}

BausMetrics ComputeBaus(std::span<const Prediction> open_predictions,
                        const MetadataTable& table, const SplitAssignment& split) {
  const auto index = IndexByRow(open_predictions, table.size());
  BausMetrics out;
  std::vector<double> values;
  for (const std::string& dataset : table.datasets()) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> classes;
    for (RowIndex row : table.rows_of_dataset(dataset)) {
      if (split.labels[row] != SplitLabel::kTestNew) continue;
      const Prediction& p = RequirePrediction(index, table, row);
      auto& c = classes[table[row].identity];
      c.first += !p.identity.has_value();
      ++c.second;
    }
    if (classes.empty()) continue;
    const double v = MeanClassRate(classes);
    out.per_dataset[dataset] = v;
    values.push_back(v);
  }
  if (!values.empty()) out.macro = MeanOf(values);
  return out;
}

double NormalizedAccuracy(double baks, double baus) { return std::sqrt(baks * baus); }

double Auroc(std::span<const double> known, std::span<const double> fresh) {
  if (known.empty() || fresh.empty()) {
    throw Error(ErrorCode::kUndefined, "AUROC needs known and new scores");
  }
  struct Item {
    double score;
    bool known;
  };
  std::vector<Item> all;
  all.reserve(known.size() + fresh.size());
  for (double s : known) all.push_back({s, true});
  for (double s : fresh) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t known_in_group = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      known_in_group += all[j].known;
      ++j;
    }
    // Ranks i+1 .. j share their average.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += avg_rank * static_cast<double>(known_in_group);
    i = j;
  }
  const auto nk = static_cast<double>(known.size());
  const auto nn = static_cast<double>(fresh.size());
  return (rank_sum - nk * (nk + 1.0) / 2.0) / (nk * nn);
}

double TnrAtTpr(std::span<const double> known, std::span<const double> fresh,
                double tpr_floor) {
  if (known.empty() || fresh.empty()) {
    throw Error(ErrorCode::kUndefined, "TNR@TPR needs known and new scores");
  }
  std::vector<double> k_sorted(known.begin(), known.end());
  std::sort(k_sorted.begin(), k_sorted.end());
  std::vector<double> candidates(known.begin(), known.end());
  candidates.insert(candidates.end(), fresh.begin(), fresh.end());
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double threshold = -std::numeric_limits<double>::infinity();
  const auto nk = static_cast<double>(known.size());
  for (double t : candidates) {
    const auto at_or_above = static_cast<double>(
        k_sorted.end() - std::lower_bound(k_sorted.begin(), k_sorted.end(), t));
    if (at_or_above / nk >= tpr_floor) {
      threshold = t;
      break;
    }
  }
  const auto below = std::count_if(fresh.begin(), fresh.end(),
                                   [&](double s) { return s < threshold; });
  return static_cast<double>(below) / static_cast<double>(fresh.size());
}

double CurveArea(std::span<const CurvePoint> points) {
  std::vector<std::pair<double, double>> xy;
  xy.reserve(points.size());
  for (const CurvePoint& p : points) xy.emplace_back(p.baks, p.baus);
  std::sort(xy.begin(), xy.end());
  std::vector<std::pair<double, double>> collapsed;
  for (const auto& [x, y] : xy) {
    if (!collapsed.empty() && collapsed.back().first == x) {
      collapsed.back().second = std::max(collapsed.back().second, y);
    } else {
      collapsed.emplace_back(x, y);
    }
  }
  double area = 0.0;
  for (std::size_t i = 1; i < collapsed.size(); ++i) {
    area += (collapsed[i].first - collapsed[i - 1].first) *
            (collapsed[i].second + collapsed[i - 1].second) / 2.0;
  }
  return area;
}

BaksBausCurve ComputeBaksBausCurve(std::span<const Prediction> scored,
                                   const MetadataTable& table,
                                   const SplitAssignment& split) {
  const auto index = IndexByRow(scored, table.size());
  using ClassCounts = std::map<std::string, std::pair<std::size_t, std::size_t>>;
  struct DatasetState {
    ClassCounts known;    // (correct and accepted, total)
    ClassCounts unknown;  // (flagged new, total)
    double known_rate = 0.0;
    double unknown_rate = 0.0;
    bool dirty = true;
  };
  struct Event {
    double confidence;
    std::size_t dataset;
    const std::string* identity;
    bool known;
    bool correct;
  };

  std::vector<DatasetState> states;
  std::vector<Event> events;
  for (const std::string& dataset : table.datasets()) {
    const std::size_t d = states.size();
    states.emplace_back();
    for (RowIndex row : table.rows_of_dataset(dataset)) {
      const SplitLabel label = split.labels[row];
      if (label == SplitLabel::kTrain) continue;
      const Prediction& p = RequirePrediction(index, table, row);
      const std::string& identity = table[row].identity;
      if (label == SplitLabel::kTestKnown) {
        const bool correct = p.identity && *p.identity == table[row].key();
        auto& c = states[d].known[identity];
        c.first += correct;
        ++c.second;
        events.push_back({p.confidence, d, &identity, true, correct});
      } else {
        ++states[d].unknown[identity].second;
        events.push_back({p.confidence, d, &identity, false, false});
      }
    }
  }
  bool any_known = false, any_unknown = false;
  for (const auto& s : states) {
    any_known |= !s.known.empty();
    any_unknown |= !s.unknown.empty();
  }
  if (!any_known || !any_unknown) {
    throw Error(ErrorCode::kUndefined,
                "BAKS-BAUS curve needs both test_known and test_new images");
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.confidence < b.confidence;
  });

  auto emit = [&](double t_new) {
    std::vector<double> ks, us;
    for (auto& s : states) {
      if (s.dirty) {
        if (!s.known.empty()) s.known_rate = MeanClassRate(s.known);
        if (!s.unknown.empty()) s.unknown_rate = MeanClassRate(s.unknown);
        s.dirty = false;
      }
      if (!s.known.empty()) ks.push_back(s.known_rate);
      if (!s.unknown.empty()) us.push_back(s.unknown_rate);
    }
    CurvePoint p;
    p.t_new = t_new;
    p.baks = MeanOf(ks);
    p.baus = MeanOf(us);
    p.normalized = NormalizedAccuracy(p.baks, p.baus);
    return p;
  };

  BaksBausCurve curve;
  const double lo = events.front().confidence;
  const double hi = events.back().confidence;
  curve.points.push_back(emit(lo - 1.0));
  // At t_new = v every event with confidence < v has been flipped to "new".
  std::size_t next = 0;
  auto flip_below = [&](double t) {
    for (; next < events.size() && events[next].confidence < t; ++next) {
      const Event& e = events[next];
      DatasetState& s = states[e.dataset];
      if (e.known) {
        if (e.correct) --s.known[*e.identity].first;
      } else {
        ++s.unknown[*e.identity].first;
      }
      s.dirty = true;
    }
  };
  for (std::size_t i = 0; i < events.size();) {
    const double v = events[i].confidence;
    flip_below(v);
    curve.points.push_back(emit(v));
    while (i < events.size() && events[i].confidence == v) ++i;
  }
  flip_below(std::numeric_limits<double>::infinity());
  curve.points.push_back(emit(hi + 1.0));
  curve.area = CurveArea(curve.points);
  return curve;
}

MetricReport Evaluate(std::span<const Prediction> scored,
                      const MetadataTable& table, const SplitAssignment& split,
                      std::optional<double> t_new, std::string scorer_name) {
  MetricReport report;
  report.scorer = std::move(scorer_name);
  report.closed = ComputeClosedMetrics(scored, table, split);

  std::vector<double> known, fresh;
  for (const Prediction& p : scored) {
    const SplitLabel label = split.labels[p.row];
    if (label == SplitLabel::kTestKnown) known.push_back(p.confidence);
    if (label == SplitLabel::kTestNew) fresh.push_back(p.confidence);
  }
  if (t_new) {
    std::vector<Prediction> open;
    open.reserve(scored.size());
    for (const Prediction& p : scored) open.push_back(PredictOpenSet(p, *t_new));
    report.t_new = t_new;
    report.open_known = ComputeClosedMetrics(open, table, split);
    report.baus = ComputeBaus(open, table, split);
    if (report.baus->macro) {
      report.normalized = NormalizedAccuracy(report.open_known->baks, *report.baus->macro);
    }
  }
  if (!known.empty() && !fresh.empty()) {
    report.auroc = Auroc(known, fresh);
    report.tnr_at_95tpr = TnrAtTpr(known, fresh, 0.95);
    report.curve = ComputeBaksBausCurve(scored, table, split);
  }
  return report;
}

nlohmann::json ReportToJson(const MetricReport& report) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json datasets = nlohmann::json::object();
  for (const auto& [name, d] : report.closed.per_dataset) {
    nlohmann::json block = {{"images", d.images},
                            {"classes", d.classes},
                            {"top1", d.top1},
                            {"top5", d.top5},
                            {"baks", d.baks}};
    if (report.open_known) {
      auto it = report.open_known->per_dataset.find(name);
      block["open_baks"] = it == report.open_known->per_dataset.end()
                               ? nlohmann::json(nullptr)
                               : nlohmann::json(it->second.baks);
    }
    datasets[name] = block;
  }
  if (report.baus) {
    for (const auto& [name, v] : report.baus->per_dataset) datasets[name]["baus"] = v;
  }
  nlohmann::json macro = {{"mtop1", report.closed.top1},
                          {"mtop5", report.closed.top5},
                          {"baks", report.closed.baks}};
  if (report.t_new) {
    macro["open_baks"] = report.open_known->baks;
    macro["baus"] = opt(report.baus->macro);
    macro["normalized"] = opt(report.normalized);
  }
  nlohmann::json sweep = nlohmann::json::array();
  if (report.curve) {
    for (const CurvePoint& p : report.curve->points) {
      sweep.push_back({{"t_new", p.t_new},
                       {"baks", p.baks},
                       {"baus", p.baus},
                       {"normalized", p.normalized}});
    }
  }
  return {{"scorer", report.scorer},
          {"t_new", opt(report.t_new)},
          {"datasets", datasets},
          {"macro", macro},
          {"auroc", opt(report.auroc)},
          {"tnr_at_95tpr", opt(report.tnr_at_95tpr)},
          {"curve_area", report.curve ? nlohmann::json(report.curve->area)
                                      : nlohmann::json(nullptr)},
          {"sweep", sweep}};
}

}  // namespace wildsplit
