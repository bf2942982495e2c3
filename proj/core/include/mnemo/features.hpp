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
#include <bitset>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mnemo/domain.hpp"

namespace mnemo {

// Study-data features of one (user, card) pair at one instant. The first 22
// slots mirror the released dataset's feature columns and keep their names;
// the last two are per-session accuracies.
enum class Feature : std::uint8_t {
  kIsNewFact,
  kUserNStudyPositive,
  kUserNStudyNegative,
  kUserNStudyTotal,
  kCardNStudyPositive,
  kCardNStudyNegative,
  kCardNStudyTotal,
  kUserCardNStudyPositive,
  kUserCardNStudyNegative,
  kUserCardNStudyTotal,
  kAccUser,
  kAccCard,
  kAccUserCard,
  kUserCardDelta,          // hours since the last study of the card
  kUserCardDeltaPrevious,  // hours between the last two studies
  kUserCardPrevResponse,
  kLeitnerBox,
  kSm2EFactor,
  kSm2Interval,  // days
  kSm2Repetition,
  kDeltaToLeitner,  // days until the Leitner review date
  kDeltaToSm2,      // days until the SM-2 review date
  kSessionAccUser,
  kSessionAccUserCard,
};

inline constexpr std::size_t kFeatureCount = 24;
// Number of slots that correspond to stored dataset columns.
inline constexpr std::size_t kDatasetFeatureCount = 22;

inline constexpr std::size_t index_of(Feature f) { return static_cast<std::size_t>(f); }
std::string_view feature_name(Feature f);
std::optional<Feature> feature_from_name(std::string_view name);
std::array<Feature, kFeatureCount> all_features();

// Records of one user more than this far apart belong to different sessions.
inline constexpr Timestamp kSessionGap = 30 * 60;
inline constexpr int kLeitnerMaxBox = 10;
inline constexpr double kSm2InitialEFactor = 2.5;

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double operator[](Feature f) const { return values[index_of(f)]; }
  double& operator[](Feature f) { return values[index_of(f)]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct CardTally {
  std::int64_t positive = 0;
  std::int64_t negative = 0;

  std::int64_t total() const { return positive + negative; }
  double accuracy() const { return total() == 0 ? 0.0 : static_cast<double>(positive) / total(); }
  void add(bool correct) { (correct ? positive : negative) += 1; }

  friend bool operator==(const CardTally&, const CardTally&) = default;
};

// Corpus-wide per-card response counts over all users.
class CardAggregates {
 public:
  void add(std::string_view card_id, bool correct);
  CardTally tally(std::string_view card_id) const;
  std::size_t size() const { return tallies_.size(); }
  const auto& tallies() const { return tallies_; }

 private:
  std::unordered_map<std::string, CardTally, StringHash, std::equal_to<>> tallies_;
};

// Read-only view over CardAggregates plus hypothetical studies that never
// touch the underlying aggregates.
class CardAggregatesView {
 public:
  CardAggregatesView(const CardAggregates& base) : base_(&base) {}  // NOLINT(google-explicit-constructor)

  CardTally tally(std::string_view card_id) const;
  CardAggregatesView with_study(std::string_view card_id, bool correct) const;

 private:
  const CardAggregates* base_;
  std::vector<std::pair<std::string, CardTally>> extra_;
};

int leitner_step(int box, bool correct);

struct Sm2State {
  double efactor = kSm2InitialEFactor;
  double interval_days = 0.0;
  int repetition = 0;

  friend bool operator==(const Sm2State&, const Sm2State&) = default;
};

// Binary responses map to quality 4 (correct) and 1 (incorrect).
Sm2State sm2_step(Sm2State state, bool correct);

struct Study {
  Timestamp at = 0;
  bool correct = false;
};

struct UserCardState {
  std::string card_id;
  CardTally tally;
  Timestamp last_study = 0;
  Timestamp previous_study = 0;  // meaningful once tally.total() >= 2
  bool last_correct = false;
  int leitner_box = 0;
  Sm2State sm2;
  std::uint64_t last_sequence = 0;  // position of the latest study in the user's log
  std::uint64_t session = 0;
  CardTally session_tally;
  std::vector<Study> studies;
};

/// Incrementally folded view of one user's log: everything feature
/// extraction needs, updated in O(1) per record.
class UserState {
 public:
  UserState() = default;
  explicit UserState(std::string user_id) : user_id_(std::move(user_id)) {}

  static UserState replay(const StudyHistory& history);

  // Same error contract as append_record().
  void apply(const StudyRecord& record);

  const std::string& user_id() const { return user_id_; }
  std::uint64_t record_count() const { return count_; }
  const CardTally& totals() const { return totals_; }
  std::optional<Timestamp> last_timestamp() const { return last_; }

  const UserCardState* card(std::string_view card_id) const;
  // Cards in first-study order.
  std::span<const UserCardState> cards() const { return cards_; }

  // Counts within the session still open at `now` (zero if it has lapsed).
  CardTally session_totals(Timestamp now) const;
  CardTally session_tally(const UserCardState& card, Timestamp now) const;

  // Pins the user-level aggregates (user counts and accuracy) to their
  // current values until thawed.
  void freeze_user_aggregates() { frozen_ = totals_; }
  void thaw_user_aggregates() { frozen_.reset(); }
  const std::optional<CardTally>& frozen_totals() const { return frozen_; }

 private:
  bool session_open(Timestamp now) const;

  std::string user_id_;
  std::vector<UserCardState> cards_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> index_;
  CardTally totals_;
  std::optional<CardTally> frozen_;
  std::optional<Timestamp> last_;
  std::uint64_t count_ = 0;
  std::uint64_t session_ = 0;
  CardTally session_totals_;
};

// Features for `card_id` at `now`, counting every record folded into `user`.
// Throws kOutOfOrderTimestamp when now precedes the user's last record.
FeatureVector extract(const UserState& user, std::string_view card_id, Timestamp now,
                      const CardAggregatesView& cards);
FeatureVector extract(const StudyHistory& history, const Flashcard& card, Timestamp now,
                      const CardAggregatesView& cards);

struct LeitnerQuery {
  int box = 0;
  double delta_to_review_days = 0.0;
};

struct Sm2Query {
  Sm2State state;
  double delta_to_review_days = 0.0;
};

LeitnerQuery leitner_state(const StudyHistory& history, std::string_view card_id, Timestamp now);
Sm2Query sm2_state(const StudyHistory& history, std::string_view card_id, Timestamp now);

class FeatureMask {
 public:
  FeatureMask() = default;

  static FeatureMask all();
  static FeatureMask none() { return {}; }
  // Reduced set used for the headline offline comparison: is_new_fact,
  // user_n_study_total, card_n_study_total, usercard_n_study_total, the three
  // accuracies, usercard_delta and usercard_prev_response.
  static FeatureMask offline_subset();

  FeatureMask& set(Feature f, bool on = true);
  bool test(Feature f) const { return bits_.test(index_of(f)); }
  std::size_t count() const { return bits_.count(); }
  std::vector<Feature> active() const;
  std::string to_string() const;  // comma-separated names
  static FeatureMask parse(std::string_view names);

  friend bool operator==(const FeatureMask&, const FeatureMask&) = default;

 private:
  std::bitset<kFeatureCount> bits_;
};

struct NormalizationStats {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};  // population convention

  // Zero-variance features are centred but not scaled.
  bool zero_variance(Feature f) const { return !(stddev[index_of(f)] > 0.0); }
};

// Throws kEmptySplit on empty input.
NormalizationStats fit_normalization(std::span<const FeatureVector> train);

// Z-scores the active features in mask order. The span overload throws
// kDimensionMismatch when out.size() != mask.count().
std::vector<double> normalize(const FeatureVector& v, const NormalizationStats& stats,
                              const FeatureMask& mask);
void normalize_into(const FeatureVector& v, const NormalizationStats& stats, const FeatureMask& mask,
                    std::span<double> out);
// Inverse of normalize on the active features; inactive slots are zero.
FeatureVector denormalize(std::span<const double> z, const NormalizationStats& stats,
                          const FeatureMask& mask);

}  // namespace mnemo
