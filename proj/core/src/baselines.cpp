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

#include "mnemo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <unordered_map>

#include "mnemo/error.hpp"
#include "mnemo/keyvalue.hpp"

namespace mnemo {
namespace {

constexpr double kLn2 = std::numbers::ln2;

double clamp_unit(double p) { return std::clamp(p, 0.0, 1.0); }

double hlr_exponent(const HlrWeights& w, double n_correct, double n_incorrect) {
  return w.bias + w.sqrt_correct * std::sqrt(n_correct) + w.sqrt_incorrect * std::sqrt(n_incorrect);
}

}  // namespace

double leitner_probability(int box) {
  return clamp_unit(static_cast<double>(std::min(box, kLeitnerPredictionSlots)) / kLeitnerPredictionSlots);
}

double sm2_probability(int repetition, double accuracy) {
  return clamp_unit(static_cast<double>(repetition) / kLeitnerPredictionSlots) * clamp_unit(accuracy);
}

RecallPrediction leitner_predict(const StudyHistory& history, std::string_view card_id, Timestamp now) {
  return {leitner_probability(leitner_state(history, card_id, now).box), "leitner"};
}

RecallPrediction sm2_predict(const StudyHistory& history, std::string_view card_id, Timestamp now) {
  CardTally tally;
  for (const auto& e : history.entries()) {
    if (e.record.card_id == card_id) tally.add(e.record.correct);
  }
  const Sm2Query q = sm2_state(history, card_id, now);
  return {sm2_probability(q.state.repetition, tally.accuracy()), "sm2"};
}

double hlr_half_life_hours(const HlrWeights& w, double n_correct, double n_incorrect) {
  const double s = std::clamp(hlr_exponent(w, n_correct, n_incorrect), -kHlrExponentBound, kHlrExponentBound);
  return std::exp2(s);
}

RecallPrediction hlr_predict(const HlrWeights& w, double n_correct, double n_incorrect, double delta_hours) {
  if (!(delta_hours >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "HLR delta must be non-negative");
  const double h = hlr_half_life_hours(w, n_correct, n_incorrect);
  return {std::exp2(-delta_hours / h), "hlr"};
}

double hlr_loss(const HlrWeights& w, std::span<const HlrExample> data) {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (const HlrExample& ex : data) {
    const double p = hlr_predict(w, ex.n_correct, ex.n_incorrect, ex.delta_hours).probability;
    const double r = p - (ex.label ? 1.0 : 0.0);
    sum += r * r;
  }
  return sum / static_cast<double>(data.size());
}

std::array<double, 3> hlr_gradient(const HlrWeights& w, std::span<const HlrExample> data) {
  std::array<double, 3> g{};
  if (data.empty()) return g;
  for (const HlrExample& ex : data) {
    const double raw = hlr_exponent(w, ex.n_correct, ex.n_incorrect);
    if (raw < -kHlrExponentBound || raw > kHlrExponentBound) continue;  // clamped: flat
    const double inv_h = std::exp2(-raw);
    const double p = std::exp2(-ex.delta_hours * inv_h);
    // dp/ds for p = 2^(-delta * 2^-s)
    const double dp_ds = p * kLn2 * kLn2 * ex.delta_hours * inv_h;
    const double coef = 2.0 * (p - (ex.label ? 1.0 : 0.0)) * dp_ds;
    g[0] += coef;
    g[1] += coef * std::sqrt(ex.n_correct);
    g[2] += coef * std::sqrt(ex.n_incorrect);
  }
  for (double& x : g) x /= static_cast<double>(data.size());
  return g;
}

HlrFitResult hlr_fit(std::span<const HlrExample> train, const HlrFitOptions& options) {
  if (train.empty()) throw Error(ErrorCode::kEmptySplit, "HLR training set is empty");
  HlrFitResult result;
  HlrWeights w = options.initial;
  double loss = hlr_loss(w, train);
  double step = options.learning_rate;
  result.loss_per_epoch.push_back(loss);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const auto g = hlr_gradient(w, train);
    const double g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    if (g2 > 0.0) {
      while (step > 1e-12) {
        const HlrWeights trial{w.bias - step * g[0], w.sqrt_correct - step * g[1], w.sqrt_incorrect - step * g[2]};
        const double trial_loss = hlr_loss(trial, train);
        if (trial_loss <= loss - 1e-4 * step * g2) {
          w = trial;
          loss = trial_loss;
          step *= 2.0;
          break;
        }
        step *= 0.5;
      }
    }
    result.loss_per_epoch.push_back(loss);
  }
  result.weights = w;
  return result;
}

void save_hlr_weights(const HlrWeights& w, std::ostream& out) {
  write_key_values({{"model", "hlr"},
                    {"bias", format_double(w.bias)},
                    {"sqrt_correct", format_double(w.sqrt_correct)},
                    {"sqrt_incorrect", format_double(w.sqrt_incorrect)}},
                   out);
}

HlrWeights load_hlr_weights(std::istream& in) {
  const KeyValues kv = read_key_values(in);
  if (require_key(kv, "model") != "hlr") throw Error(ErrorCode::kTypeMismatch, "not an HLR weights file");
  HlrWeights w;
  w.bias = parse_double(require_key(kv, "bias"), "bias");
  w.sqrt_correct = parse_double(require_key(kv, "sqrt_correct"), "sqrt_correct");
  w.sqrt_incorrect = parse_double(require_key(kv, "sqrt_incorrect"), "sqrt_incorrect");
  return w;
}

RecallPrediction fsrs_predict(const FsrsState& state, double delta_days) {
  if (!(delta_days >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "FSRS delta must be non-negative");
  return {1.0 / (1.0 + delta_days / (9.0 * state.stability)), "fsrs-simplified"};
}

FsrsState fsrs_update(const FsrsState& state, bool correct, double delta_days) {
  const double retrievability = fsrs_predict(state, delta_days).probability;
  FsrsState next = state;
  if (correct) {
    next.stability = state.stability * (1.0 + kFsrsGrowth * (1.0 - retrievability));
    next.difficulty = std::clamp(state.difficulty - 0.5, 1.0, 10.0);
  } else {
    next.stability = std::max(kFsrsMinStability, state.stability * kFsrsLapseFactor);
    next.difficulty = std::clamp(state.difficulty + 0.5, 1.0, 10.0);
  }
  return next;
}

FsrsState fsrs_replay(std::span<const Study> studies) {
  FsrsState state;
  for (std::size_t i = 0; i < studies.size(); ++i) {
    const double delta = i == 0 ? 0.0 : days_between(studies[i - 1].at, studies[i].at);
    state = fsrs_update(state, studies[i].correct, delta);
  }
  return state;
}

double LeitnerModel::predict(const UserState& user, const CardAggregatesView&, std::string_view card_id,
                             Timestamp) const {
  const UserCardState* uc = user.card(card_id);
  return uc ? leitner_probability(uc->leitner_box) : 0.0;
}

double Sm2Model::predict(const UserState& user, const CardAggregatesView&, std::string_view card_id,
                         Timestamp) const {
  const UserCardState* uc = user.card(card_id);
  return uc ? sm2_probability(uc->sm2.repetition, uc->tally.accuracy()) : 0.0;
}

double HlrModel::predict(const UserState& user, const CardAggregatesView&, std::string_view card_id,
                         Timestamp now) const {
  const UserCardState* uc = user.card(card_id);
  if (!uc) return hlr_predict(weights_, 0.0, 0.0, 0.0).probability;
  return hlr_predict(weights_, static_cast<double>(uc->tally.positive), static_cast<double>(uc->tally.negative),
                     std::max(0.0, hours_between(uc->last_study, now)))
      .probability;
}

double FsrsModel::predict(const UserState& user, const CardAggregatesView&, std::string_view card_id,
                          Timestamp now) const {
  const UserCardState* uc = user.card(card_id);
  if (!uc) return fsrs_predict(FsrsState{}, 0.0).probability;
  return fsrs_predict(fsrs_replay(uc->studies), std::max(0.0, days_between(uc->last_study, now))).probability;
}

std::vector<HlrExample> hlr_examples(std::span<const StudyRecord> chronological) {
  struct Running {
    CardTally tally;
    Timestamp last = 0;
  };
  std::unordered_map<std::string, Running> state;
  std::vector<HlrExample> out;
  for (const StudyRecord& r : chronological) {
    Running& s = state[r.user_id + '\x1f' + r.card_id];
    if (s.tally.total() > 0) {
      out.push_back({static_cast<double>(s.tally.positive), static_cast<double>(s.tally.negative),
                     std::max(0.0, hours_between(s.last, r.timestamp)), r.correct});
    }
    s.tally.add(r.correct);
    s.last = r.timestamp;
  }
  return out;
}

}  // namespace mnemo
