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

#include "mnemo/features.hpp"

#include <algorithm>
#include <cmath>

#include "mnemo/error.hpp"

namespace mnemo {
namespace {

constexpr std::array<std::string_view, kFeatureCount> kNames = {
    "is_new_fact",
    "user_n_study_positive",
    "user_n_study_negative",
    "user_n_study_total",
    "card_n_study_positive",
    "card_n_study_negative",
    "card_n_study_total",
    "usercard_n_study_positive",
    "usercard_n_study_negative",
    "usercard_n_study_total",
    "acc_user",
    "acc_card",
    "acc_usercard",
    "usercard_delta",
    "usercard_delta_previous",
    "usercard_prev_response",
    "leitner_box",
    "sm2_efactor",
    "sm2_interval",
    "sm2_repetition",
    "delta_to_leitner",
    "delta_to_sm2",
    "session_acc_user",
    "session_acc_usercard",
};

}  // namespace

std::string_view feature_name(Feature f) { return kNames[index_of(f)]; }

std::optional<Feature> feature_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (kNames[i] == name) return static_cast<Feature>(i);
  }
  return std::nullopt;
}

std::array<Feature, kFeatureCount> all_features() {
  std::array<Feature, kFeatureCount> out{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = static_cast<Feature>(i);
  return out;
}

void CardAggregates::add(std::string_view card_id, bool correct) {
  auto it = tallies_.find(card_id);
  if (it == tallies_.end()) it = tallies_.emplace(std::string(card_id), CardTally{}).first;
  it->second.add(correct);
}

CardTally CardAggregates::tally(std::string_view card_id) const {
  auto it = tallies_.find(card_id);
  return it == tallies_.end() ? CardTally{} : it->second;
}

CardTally CardAggregatesView::tally(std::string_view card_id) const {
  CardTally t = base_->tally(card_id);
  for (const auto& [id, extra] : extra_) {
    if (id == card_id) {
      t.positive += extra.positive;
      t.negative += extra.negative;
    }
  }
  return t;
}

CardAggregatesView CardAggregatesView::with_study(std::string_view card_id, bool correct) const {
  CardAggregatesView out = *this;
  CardTally t;
  t.add(correct);
  out.extra_.emplace_back(std::string(card_id), t);
  return out;
}

int leitner_step(int box, bool correct) {
  return correct ? std::min(box + 1, kLeitnerMaxBox) : std::max(box - 1, 0);
}

Sm2State sm2_step(Sm2State s, bool correct) {
  const double q = correct ? 4.0 : 1.0;
  if (correct) {
    s.repetition += 1;
    if (s.repetition == 1) {
      s.interval_days = 1.0;
    } else if (s.repetition == 2) {
      s.interval_days = 6.0;
    } else {
      s.interval_days *= s.efactor;
    }
  } else {
    s.repetition = 0;
    s.interval_days = 1.0;
  }
  const double miss = 5.0 - q;
  s.efactor += 0.1 - miss * (0.08 + miss * 0.02);
  s.efactor = std::clamp(s.efactor, 0.0, kSm2InitialEFactor);
  return s;
}

UserState UserState::replay(const StudyHistory& history) {
  UserState state(history.user_id());
  for (const auto& entry : history.entries()) state.apply(entry.record);
  return state;
}

void UserState::apply(const StudyRecord& record) {
  validate(record);
  if (user_id_.empty()) {
    user_id_ = record.user_id;
  } else if (record.user_id != user_id_) {
    throw Error(ErrorCode::kUserMismatch,
                "record for user '" + record.user_id + "' applied to state of '" + user_id_ + "'");
  }
  if (last_ && record.timestamp < *last_) {
    throw Error(ErrorCode::kOutOfOrderTimestamp,
                "timestamp " + std::to_string(record.timestamp) + " precedes last " + std::to_string(*last_));
  }

  if (!last_ || record.timestamp - *last_ >= kSessionGap) {
    ++session_;
    session_totals_ = {};
  }

  auto it = index_.find(record.card_id);
  if (it == index_.end()) {
    it = index_.emplace(record.card_id, cards_.size()).first;
    UserCardState fresh;
    fresh.card_id = record.card_id;
    cards_.push_back(std::move(fresh));
  }
  UserCardState& card = cards_[it->second];
  if (card.tally.total() > 0) card.previous_study = card.last_study;
  card.last_study = record.timestamp;
  card.last_correct = record.correct;
  card.tally.add(record.correct);
  card.leitner_box = leitner_step(card.leitner_box, record.correct);
  card.sm2 = sm2_step(card.sm2, record.correct);
  card.last_sequence = count_;
  if (card.session != session_) {
    card.session = session_;
    card.session_tally = {};
  }
  card.session_tally.add(record.correct);
  card.studies.push_back({record.timestamp, record.correct});

  totals_.add(record.correct);
  session_totals_.add(record.correct);
  last_ = record.timestamp;
  ++count_;
}

const UserCardState* UserState::card(std::string_view card_id) const {
  auto it = index_.find(card_id);
  return it == index_.end() ? nullptr : &cards_[it->second];
}

bool UserState::session_open(Timestamp now) const { return last_ && now - *last_ < kSessionGap; }

CardTally UserState::session_totals(Timestamp now) const {
  return session_open(now) ? session_totals_ : CardTally{};
}

CardTally UserState::session_tally(const UserCardState& card, Timestamp now) const {
  return session_open(now) && card.session == session_ ? card.session_tally : CardTally{};
}

FeatureVector extract(const UserState& user, std::string_view card_id, Timestamp now,
                      const CardAggregatesView& cards) {
  if (auto last = user.last_timestamp(); last && now < *last) {
    throw Error(ErrorCode::kOutOfOrderTimestamp,
                "feature query at " + std::to_string(now) + " precedes last record " + std::to_string(*last));
  }
  FeatureVector v;
  const CardTally& totals = user.frozen_totals() ? *user.frozen_totals() : user.totals();
  v[Feature::kUserNStudyPositive] = static_cast<double>(totals.positive);
  v[Feature::kUserNStudyNegative] = static_cast<double>(totals.negative);
  v[Feature::kUserNStudyTotal] = static_cast<double>(totals.total());
  v[Feature::kAccUser] = totals.accuracy();

  const CardTally global = cards.tally(card_id);
  v[Feature::kCardNStudyPositive] = static_cast<double>(global.positive);
  v[Feature::kCardNStudyNegative] = static_cast<double>(global.negative);
  v[Feature::kCardNStudyTotal] = static_cast<double>(global.total());
  v[Feature::kAccCard] = global.accuracy();
  v[Feature::kSessionAccUser] = user.session_totals(now).accuracy();

  const UserCardState* uc = user.card(card_id);
  if (uc == nullptr) {
    v[Feature::kIsNewFact] = 1.0;
    v[Feature::kSm2EFactor] = kSm2InitialEFactor;
    return v;
  }
  v[Feature::kUserCardNStudyPositive] = static_cast<double>(uc->tally.positive);
  v[Feature::kUserCardNStudyNegative] = static_cast<double>(uc->tally.negative);
  v[Feature::kUserCardNStudyTotal] = static_cast<double>(uc->tally.total());
  v[Feature::kAccUserCard] = uc->tally.accuracy();
  v[Feature::kUserCardDelta] = hours_between(uc->last_study, now);
  v[Feature::kUserCardDeltaPrevious] =
      uc->tally.total() >= 2 ? hours_between(uc->previous_study, uc->last_study) : 0.0;
  v[Feature::kUserCardPrevResponse] = uc->last_correct ? 1.0 : 0.0;
  v[Feature::kLeitnerBox] = uc->leitner_box;
  v[Feature::kSm2EFactor] = uc->sm2.efactor;
  v[Feature::kSm2Interval] = uc->sm2.interval_days;
  v[Feature::kSm2Repetition] = uc->sm2.repetition;
  const double since = days_between(uc->last_study, now);
  v[Feature::kDeltaToLeitner] = std::ldexp(1.0, uc->leitner_box) - since;
  v[Feature::kDeltaToSm2] = uc->sm2.interval_days - since;
  v[Feature::kSessionAccUserCard] = user.session_tally(*uc, now).accuracy();
  return v;
}

FeatureVector extract(const StudyHistory& history, const Flashcard& card, Timestamp now,
                      const CardAggregatesView& cards) {
  return extract(UserState::replay(history), card.card_id, now, cards);
}

LeitnerQuery leitner_state(const StudyHistory& history, std::string_view card_id, Timestamp now) {
  LeitnerQuery q;
  std::optional<Timestamp> last;
  for (const auto& e : history.entries()) {
    if (e.record.card_id != card_id) continue;
    q.box = leitner_step(q.box, e.record.correct);
    last = e.record.timestamp;
  }
  if (last) q.delta_to_review_days = std::ldexp(1.0, q.box) - days_between(*last, now);
  return q;
}

Sm2Query sm2_state(const StudyHistory& history, std::string_view card_id, Timestamp now) {
  Sm2Query q;
  std::optional<Timestamp> last;
  for (const auto& e : history.entries()) {
    if (e.record.card_id != card_id) continue;
    q.state = sm2_step(q.state, e.record.correct);
    last = e.record.timestamp;
  }
  if (last) q.delta_to_review_days = q.state.interval_days - days_between(*last, now);
  return q;
}

FeatureMask FeatureMask::all() {
  FeatureMask m;
  m.bits_.set();
  return m;
}

FeatureMask FeatureMask::offline_subset() {
  FeatureMask m;
  for (Feature f : {Feature::kIsNewFact, Feature::kUserNStudyTotal, Feature::kCardNStudyTotal,
                    Feature::kUserCardNStudyTotal, Feature::kAccUser, Feature::kAccCard, Feature::kAccUserCard,
                    Feature::kUserCardDelta, Feature::kUserCardPrevResponse}) {
    m.set(f);
  }
  return m;
}

FeatureMask& FeatureMask::set(Feature f, bool on) {
  bits_.set(index_of(f), on);
  return *this;
}

std::vector<Feature> FeatureMask::active() const {
  std::vector<Feature> out;
  for (Feature f : all_features()) {
    if (test(f)) out.push_back(f);
  }
  return out;
}

std::string FeatureMask::to_string() const {
  if (count() == 0) return "none";
  if (*this == all()) return "all";
  std::string out;
  for (Feature f : active()) {
    if (!out.empty()) out += ',';
    out += feature_name(f);
  }
  return out;
}

FeatureMask FeatureMask::parse(std::string_view names) {
  if (names == "all") return all();
  if (names == "none" || names.empty()) return none();
  if (names == "offline") return offline_subset();
  FeatureMask m;
  std::size_t pos = 0;
  while (pos <= names.size()) {
    std::size_t comma = names.find(',', pos);
    if (comma == std::string_view::npos) comma = names.size();
    std::string_view name = names.substr(pos, comma - pos);
    auto f = feature_from_name(name);
    if (!f) throw Error(ErrorCode::kInvalidArgument, "unknown feature '" + std::string(name) + "'");
    m.set(*f);
    pos = comma + 1;
  }
  return m;
}

NormalizationStats fit_normalization(std::span<const FeatureVector> train) {
  if (train.empty()) throw Error(ErrorCode::kEmptySplit, "cannot fit normalization on an empty split");
  // Welford's streaming mean/variance.
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> m2{};
  double n = 0.0;
  for (const FeatureVector& v : train) {
    n += 1.0;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const double delta = v.values[i] - mean[i];
      mean[i] += delta / n;
      m2[i] += delta * (v.values[i] - mean[i]);
    }
  }
  NormalizationStats stats;
  stats.mean = mean;
  for (std::size_t i = 0; i < kFeatureCount; ++i) stats.stddev[i] = std::sqrt(std::max(0.0, m2[i] / n));
  return stats;
}

void normalize_into(const FeatureVector& v, const NormalizationStats& stats, const FeatureMask& mask,
                    std::span<double> out) {
  if (out.size() != mask.count()) {
    throw Error(ErrorCode::kDimensionMismatch, "normalize output has " + std::to_string(out.size()) +
                                                   " slots, mask selects " + std::to_string(mask.count()));
  }
  std::size_t j = 0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!mask.test(static_cast<Feature>(i))) continue;
    const double centred = v.values[i] - stats.mean[i];
    out[j++] = stats.stddev[i] > 0.0 ? centred / stats.stddev[i] : centred;
  }
}

std::vector<double> normalize(const FeatureVector& v, const NormalizationStats& stats, const FeatureMask& mask) {
  std::vector<double> out(mask.count());
  normalize_into(v, stats, mask, out);
  return out;
}

FeatureVector denormalize(std::span<const double> z, const NormalizationStats& stats, const FeatureMask& mask) {
  if (z.size() != mask.count()) throw Error(ErrorCode::kDimensionMismatch, "denormalize width mismatch");
  FeatureVector v;
  std::size_t j = 0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!mask.test(static_cast<Feature>(i))) continue;
    const double scale = stats.stddev[i] > 0.0 ? stats.stddev[i] : 1.0;
    v.values[i] = z[j++] * scale + stats.mean[i];
  }
  return v;
}

}  // namespace mnemo
