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

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mnemo/domain.hpp"
#include "mnemo/features.hpp"
#include "mnemo/student_model.hpp"

namespace mnemo {

struct RecallPrediction {
  double probability = 0.0;
  std::string model_tag;
};

inline constexpr int kLeitnerPredictionSlots = 5;

// box / 5 with boxes above 5 treated as 5; unseen cards score 0.
RecallPrediction leitner_predict(const StudyHistory& history, std::string_view card_id, Timestamp now);
// clamp(repetition / 5, 0, 1) * acc_usercard; unseen cards score 0.
RecallPrediction sm2_predict(const StudyHistory& history, std::string_view card_id, Timestamp now);

double leitner_probability(int box);
double sm2_probability(int repetition, double accuracy);

// Half-life regression over x = (1, sqrt(n_correct), sqrt(n_incorrect)).
struct HlrWeights {
  double bias = 0.0;
  double sqrt_correct = 0.0;
  double sqrt_incorrect = 0.0;

  friend bool operator==(const HlrWeights&, const HlrWeights&) = default;
};

// The exponent of the half-life is clamped to this range before 2^(.).
inline constexpr double kHlrExponentBound = 12.0;

struct HlrExample {
  double n_correct = 0.0;
  double n_incorrect = 0.0;
  double delta_hours = 0.0;
  bool label = false;
};

double hlr_half_life_hours(const HlrWeights& w, double n_correct, double n_incorrect);
// Probability 2^(-delta/h). Throws kInvalidArgument for negative delta.
RecallPrediction hlr_predict(const HlrWeights& w, double n_correct, double n_incorrect, double delta_hours);

// Mean squared error between predicted recall and 0/1 labels, and its
// gradient in (bias, sqrt_correct, sqrt_incorrect) order.
double hlr_loss(const HlrWeights& w, std::span<const HlrExample> data);
std::array<double, 3> hlr_gradient(const HlrWeights& w, std::span<const HlrExample> data);

struct HlrFitOptions {
  double learning_rate = 0.01;  // initial step; adapted by line search
  int epochs = 200;
  HlrWeights initial;
};

struct HlrFitResult {
  HlrWeights weights;
  std::vector<double> loss_per_epoch;  // entry 0 is the initial loss
};

// Full-batch gradient descent with Armijo backtracking, so the training loss
// never increases between epochs. Throws kEmptySplit.
HlrFitResult hlr_fit(std::span<const HlrExample> train, const HlrFitOptions& options = {});

void save_hlr_weights(const HlrWeights& w, std::ostream& out);
HlrWeights load_hlr_weights(std::istream& in);

/// Stand-in retrievability model, labelled "fsrs-simplified": power-law
/// decay (1 + t / (9 S))^-1 with multiplicative stability updates. It is not
/// a port of the fitted FSRS scheduler.
struct FsrsState {
  double stability = 1.0;   // days
  double difficulty = 5.0;  // [1, 10]

  friend bool operator==(const FsrsState&, const FsrsState&) = default;
};

inline constexpr double kFsrsGrowth = 3.0;
inline constexpr double kFsrsLapseFactor = 0.3;
inline constexpr double kFsrsMinStability = 0.1;

RecallPrediction fsrs_predict(const FsrsState& state, double delta_days);
FsrsState fsrs_update(const FsrsState& state, bool correct, double delta_days);
// Folds fsrs_update over a card's studies, delta measured between studies.
FsrsState fsrs_replay(std::span<const Study> studies);

class LeitnerModel final : public StudentModel {
 public:
  std::string tag() const override { return "leitner"; }
  double predict(const UserState& user, const CardAggregatesView& cards, std::string_view card_id,
                 Timestamp now) const override;
};

class Sm2Model final : public StudentModel {
 public:
  std::string tag() const override { return "sm2"; }
  double predict(const UserState& user, const CardAggregatesView& cards, std::string_view card_id,
                 Timestamp now) const override;
};

class HlrModel final : public StudentModel {
 public:
  explicit HlrModel(HlrWeights weights) : weights_(weights) {}
  std::string tag() const override { return "hlr"; }
  double predict(const UserState& user, const CardAggregatesView& cards, std::string_view card_id,
                 Timestamp now) const override;
  const HlrWeights& weights() const { return weights_; }

 private:
  HlrWeights weights_;
};

class FsrsModel final : public StudentModel {
 public:
  std::string tag() const override { return "fsrs-simplified"; }
  double predict(const UserState& user, const CardAggregatesView& cards, std::string_view card_id,
                 Timestamp now) const override;
};

// HLR training rows from a chronological log: one row per record whose card
// the user had already studied.
std::vector<HlrExample> hlr_examples(std::span<const StudyRecord> chronological);

}  // namespace mnemo
