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
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mnemo/domain.hpp"
#include "mnemo/features.hpp"
#include "mnemo/network.hpp"
#include "mnemo/retrieval.hpp"
#include "mnemo/student_model.hpp"

// Independent reference implementations. None of these call the routine they
// are used to check.
namespace mnemo::oracle {

// Fraction of (positive, negative) pairs ordered correctly, ties counting 1/2.
double pairwise_auc(std::span<const double> scores, std::span<const int> labels);

// Sum over bins of (|bin|/N)|mean score - mean label|, bin membership decided
// by explicit edge comparisons lo < s <= hi (score 0 joins the first bin).
double binned_ece(std::span<const double> scores, std::span<const int> labels, int bins);

// Every slot recomputed by scanning the full prefix of the global log.
// `prefix` holds all records strictly before the query, all users, in order.
FeatureVector scan_features(std::span<const StudyRecord> prefix, const std::string& user_id,
                            const std::string& card_id, Timestamp now);

// Random multi-user chronological log with session gaps and repeats.
std::vector<StudyRecord> random_log(std::mt19937_64& rng, std::size_t n_records, std::size_t n_users,
                                    std::size_t n_cards);

// Scores every candidate, sorts by (score desc, card_id asc), keeps k.
std::vector<std::pair<std::string, double>> brute_topk(const EmbeddingStore& store,
                                                       std::span<const std::size_t> candidates,
                                                       std::span<const float> query, std::size_t k);

EmbeddingStore random_store(std::mt19937_64& rng, std::size_t n, std::size_t dim);

// Eval-mode network output computed with plain loops.
double scalar_forward(const NetworkParams& params, std::span<const double> input);

// Mean BCE of a train-mode batch whose dropout masks come from `mask_seed`.
double batch_loss(const NetworkParams& params, const Eigen::MatrixXd& inputs, std::span<const double> labels,
                  std::uint64_t mask_seed);

// Five-point central difference of batch_loss in every parameter.
std::vector<double> numeric_gradient(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                                     std::span<const double> labels, std::uint64_t mask_seed, double h);

/// Student model answering from fixed tables, keyed on how the query state
/// differs from a base state: unchanged at `now` (p_now), unchanged at a later
/// time (p_no_study), or with one extra record on the card (p_correct or
/// p_incorrect by that record's outcome).
class TableModel final : public StudentModel {
 public:
  struct Row {
    double p_now = 0.0;
    double p_correct = 0.0;
    double p_incorrect = 0.0;
    double p_no_study = 0.0;
  };

  TableModel(std::uint64_t base_count, Timestamp now) : base_count_(base_count), now_(now) {}

  void set(std::string card_id, Row row) { rows_[std::move(card_id)] = row; }
  const Row& row(const std::string& card_id) const { return rows_.at(card_id); }

  std::string tag() const override { return "table"; }
  double predict(const UserState& user, const CardAggregatesView& cards, std::string_view card_id,
                 Timestamp now) const override;

 private:
  std::uint64_t base_count_;
  Timestamp now_;
  std::map<std::string, Row, std::less<>> rows_;
};

}  // namespace mnemo::oracle
