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

// Closed- and open-set evaluation of re-identification predictions.
//
// Scorers produce a class and a confidence t for each test image; an image
// is declared a new individual when t < t_new. Accuracies are macro-averaged
// over datasets. BAKS/BAUS additionally average over the known/unknown
// classes of each dataset before averaging over datasets.

#ifndef WILDSPLIT_EVALKIT_H_
#define WILDSPLIT_EVALKIT_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wildsplit/ingest.h"
#include "wildsplit/split.h"

namespace wildsplit {

struct Prediction {
  RowIndex row = 0;
  // nullopt means "new individual".
  std::optional<IdentityKey> identity;
  double confidence = 0.0;
  // Up to five distinct identities, best first.
  std::vector<IdentityKey> top5;
};

// Train images of one dataset, the 1-NN gallery for that dataset's tests.
class Gallery {
 public:
  Gallery(const MetadataTable& table, const SplitAssignment& split,
          std::string_view dataset);

  bool empty() const { return rows_.empty(); }
  const std::vector<RowIndex>& rows() const { return rows_; }
  const std::vector<IdentityKey>& identities() const { return identities_; }
  // Index into identities() for each gallery row.
  const std::vector<std::size_t>& identity_of_row() const { return identity_of_row_; }

 private:
  std::vector<RowIndex> rows_;
  std::vector<IdentityKey> identities_;
  std::vector<std::size_t> identity_of_row_;
};

// Most similar train image decides the class; confidence is that cosine
// similarity. Ties go to the lowest train row. Throws EmptyGallery.
Prediction KnnPredict(RowIndex test_row, const Gallery& gallery,
                      const EmbeddingMatrix& embeddings);

// Re-normalized means of each identity's normalized train embeddings.
struct Centroids {
  std::vector<IdentityKey> identities;
  std::vector<std::vector<double>> vectors;
};

// Throws DegenerateCentroid when an identity's embeddings sum to ~zero and
// EmptyGallery when the dataset has no train images.
Centroids BuildCentroids(const Gallery& gallery, const EmbeddingMatrix& embeddings);

// Nearest centroid by cosine similarity (higher = more likely known).
Prediction NmsPredict(RowIndex test_row, const Centroids& centroids,
                      const EmbeddingMatrix& embeddings);

struct LogitScore {
  std::size_t cls = 0;
  double t = 0.0;
};

// Argmax with ties to the lowest index; t is the max softmax probability
// (max-subtracted) or the max logit. Throw BadLogits on non-finite input.
LogitScore MspScore(std::span<const float> logits);
LogitScore MlsScore(std::span<const float> logits);

enum class Scorer { kKnn, kNms, kMsp, kMls };
std::optional<Scorer> ParseScorer(std::string_view name);
std::string_view ScorerName(Scorer scorer);

// Class names from the sidecar are identities inside the test image's own
// dataset.
Prediction LogitPredict(RowIndex test_row, const MetadataTable& table,
                        const LogitTable& logits, Scorer scorer);

// Keeps the class when t >= t_new, otherwise predicts "new".
Prediction PredictOpenSet(Prediction prediction, double t_new);

// Scores every test_known and test_new image, in row order. kKnn/kNms need
// `embeddings`, kMsp/kMls need `logits`.
std::vector<Prediction> ScoreTestImages(const MetadataTable& table,
                                        const SplitAssignment& split,
                                        Scorer scorer,
                                        const EmbeddingMatrix* embeddings,
                                        const LogitTable* logits,
                                        std::size_t threads = 1);

struct DatasetClosed {
  double top1 = 0.0;
  double top5 = 0.0;
  double baks = 0.0;
  std::size_t images = 0;
  std::size_t classes = 0;
};

struct ClosedMetrics {
  std::map<std::string, DatasetClosed> per_dataset;
  double top1 = 0.0;
  double top5 = 0.0;
  double baks = 0.0;
};

// Over test_known images. A "new" prediction counts as wrong. Throws
// Incomplete if a test_known image has no prediction and Undefined if there
// are no test_known images at all.
ClosedMetrics ComputeClosedMetrics(std::span<const Prediction> predictions,
                                   const MetadataTable& table,
                                   const SplitAssignment& split);

struct BausMetrics {
  std::map<std::string, double> per_dataset;
  // nullopt when no dataset has unknown classes.
  std::optional<double> macro;
};

// Fraction of each unknown class predicted "new", averaged per dataset, then
// over datasets that have unknown classes. Throws Incomplete.
BausMetrics ComputeBaus(std::span<const Prediction> open_predictions,
                        const MetadataTable& table, const SplitAssignment& split);

double NormalizedAccuracy(double baks, double baus);

// P(known > new) + 0.5 P(tie), via average ranks. Throws Undefined on an
// empty side.
double Auroc(std::span<const double> known, std::span<const double> fresh);

// The largest observed score (or -inf) that keeps at least tpr_floor of the
// known scores at or above it; returns the fraction of new scores below it.
double TnrAtTpr(std::span<const double> known, std::span<const double> fresh,
                double tpr_floor = 0.95);

struct CurvePoint {
  double t_new = 0.0;
  double baks = 0.0;
  double baus = 0.0;
  double normalized = 0.0;
};

struct BaksBausCurve {
  std::vector<CurvePoint> points;  // ascending t_new
  double area = 0.0;
};

// Sweeps t_new over every distinct confidence plus one sentinel below the
// minimum and one above the maximum. The area is the trapezoidal integral of
// BAUS over BAKS after sorting by BAKS and keeping the largest BAUS per BAKS
// value.
BaksBausCurve ComputeBaksBausCurve(std::span<const Prediction> scored,
                                   const MetadataTable& table,
                                   const SplitAssignment& split);

// Trapezoidal area under (x = baks, y = baus) with the collapsing rule above.
double CurveArea(std::span<const CurvePoint> points);

struct MetricReport {
  std::string scorer;
  ClosedMetrics closed;
  std::optional<double> t_new;
  std::optional<ClosedMetrics> open_known;  // BAKS/top-k with the new rule
  std::optional<BausMetrics> baus;
  std::optional<double> normalized;
  std::optional<double> auroc;
  std::optional<double> tnr_at_95tpr;
  std::optional<BaksBausCurve> curve;
};

MetricReport Evaluate(std::span<const Prediction> scored,
                      const MetadataTable& table, const SplitAssignment& split,
                      std::optional<double> t_new, std::string scorer_name);

nlohmann::json ReportToJson(const MetricReport& report);

}  // namespace wildsplit

#endif  // WILDSPLIT_EVALKIT_H_
