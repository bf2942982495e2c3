// Copyright 2026 The Mnemo Authors.
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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mnemo/domain.hpp"
#include "mnemo/features.hpp"
#include "mnemo/retrieval.hpp"
#include "mnemo/student_model.hpp"

namespace mnemo {

inline constexpr int kDefaultEceBins = 10;
inline constexpr double kDefaultAccuracyCutoff = 0.5;
inline constexpr double kDefaultTrainRatio = 0.75;
inline constexpr int kCurveDays = 20;

// Mann-Whitney AUC, ties counting one half. Labels are 0/1. Throws
// kDimensionMismatch, kDegenerateLabels.
double auc(std::span<const double> scores, std::span<const int> labels);

// Equal-width, right-closed bins over [0, 1]; score 0 falls in the first bin.
// Throws kEmptyInput, kInvalidArgument (bins < 1), kDimensionMismatch.
double ece(std::span<const double> scores, std::span<const int> labels, int bins = kDefaultEceBins);

struct AccuracySplits {
  std::optional<double> when_correct;    // label-1 rows scored >= cutoff
  std::optional<double> when_incorrect;  // label-0 rows scored < cutoff
};

AccuracySplits accuracy_splits(std::span<const double> scores, std::span<const int> labels,
                               double cutoff = kDefaultAccuracyCutoff);

struct PartitionMetrics {
  std::size_t count = 0;
  std::size_t positives = 0;
  std::optional<double> auc;  // empty for single-class partitions
  std::optional<double> ece;  // empty for empty partitions
  AccuracySplits accuracy;
};

PartitionMetrics partition_metrics(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
  std::string model;
  PartitionMetrics seen;
  PartitionMetrics unseen;
  PartitionMetrics all;
};

// One line per field, "seen.auc=0.81"; absent metrics print "n/a".
void write_report(const EvalReport& report, std::ostream& out);
std::string report_json(const EvalReport& report);

struct EvalPrediction {
  std::size_t record = 0;  // index into the chronological log
  double score = 0.0;
  bool label = false;
  bool seen = false;
};

struct EvalRun {
  EvalReport report;
  std::vector<EvalPrediction> predictions;
};

// Replays the whole log so every prediction sees the full point-in-time state,
// scoring records from `eval_begin` on. Seen means the user had studied the
// card before that record. Throws kOutOfOrderTimestamp, kEmptySplit.
std::vector<EvalRun> evaluate(std::span<const StudentModel* const> models, std::span<const StudyRecord> chronological,
                              std::size_t eval_begin);
EvalRun evaluate(const StudentModel& model, std::span<const StudyRecord> chronological, std::size_t eval_begin);

// ceil(ratio * n): the number of leading records that form the train split.
std::size_t train_count(std::size_t n, double ratio = kDefaultTrainRatio);

struct CurvePoint {
  int day = 0;
  double probability = 0.0;
};

struct ForgettingCurve {
  std::string card_id;
  std::vector<CurvePoint> points;  // days 0..20
};

// Predictions at start + d days for d = 0..20 with no further studies.
ForgettingCurve forgetting_curve(const StudentModel& model, const UserState& user, const CardAggregatesView& cards,
                                 std::string_view card_id, Timestamp start);

/// Generator of simulated students over clustered cards, used to exercise
/// training and evaluation without the released dataset.
struct SyntheticStudentSpec {
  int clusters = 5;
  std::size_t embedding_dim = 32;
  // Probability that a user of average ability knows an average card of the
  // cluster before studying it; cycled when shorter than `clusters`.
  std::vector<double> base_knowledge = {0.3, 0.45, 0.6, 0.5, 0.7};
  double user_spread = 2.5;        // std-dev of per-user, per-cluster logit offsets
  double difficulty_spread = 2.5;  // std-dev of per-card logit difficulty
  double embedding_noise = 0.25;   // per-vector noise norm around the centroid
  double difficulty_signal = 0.8;  // embedding shift per unit of difficulty
  double half_life_days = 1.5;     // median initial memory half-life
  double half_life_sigma = 0.5;    // log-normal spread of the half-life
  double half_life_growth = 2.5;   // half-life multiplier per correct study
  double learning_increment = 0.25;  // cluster logit gain per study
  double new_card_rate = 0.2;      // chance a study introduces a new card
  int focus_clusters_min = 2;
  int focus_clusters_max = 3;
  std::size_t session_length = 25;
  Timestamp start = 1577836800;  // 2020-01-01T00:00:00Z
  std::uint64_t seed = 7;
};

// Throws kInvalidArgument.
void validate(const SyntheticStudentSpec& spec);

struct SyntheticCorpus {
  std::vector<Flashcard> cards;
  std::vector<int> cluster;        // per card
  std::vector<double> difficulty;  // per card, in logits
  std::vector<StudyRecord> records;  // globally chronological
  std::vector<double> recall;        // ground-truth probability per record
  std::shared_ptr<EmbeddingStore> embeddings;
};

SyntheticCorpus generate_synthetic(const SyntheticStudentSpec& spec, std::size_t n_users, std::size_t n_cards,
                                   std::size_t n_records);

}  // namespace mnemo
