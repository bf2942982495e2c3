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

#include "mnemo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "mnemo/error.hpp"
#include "mnemo/keyvalue.hpp"

namespace mnemo {
namespace {

void check_lengths(std::size_t scores, std::size_t labels) {
  if (scores != labels) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(scores) + " scores for " + std::to_string(labels) + " labels");
  }
}

std::string metric(const std::optional<double>& v) { return v ? format_double(*v) : "n/a"; }

nlohmann::json metric_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json partition_json(const PartitionMetrics& m) {
  return {{"count", m.count},
          {"positives", m.positives},
          {"auc", metric_json(m.auc)},
          {"ece", metric_json(m.ece)},
          {"acc_when_correct", metric_json(m.accuracy.when_correct)},
          {"acc_when_incorrect", metric_json(m.accuracy.when_incorrect)}};
}

void write_partition(const std::string& prefix, const PartitionMetrics& m, std::ostream& out) {
  out << prefix << ".count=" << m.count << '\n';
  out << prefix << ".positives=" << m.positives << '\n';
  out << prefix << ".auc=" << metric(m.auc) << '\n';
  out << prefix << ".ece=" << metric(m.ece) << '\n';
  out << prefix << ".acc_when_correct=" << metric(m.accuracy.when_correct) << '\n';
  out << prefix << ".acc_when_incorrect=" << metric(m.accuracy.when_incorrect) << '\n';
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] != 0) {
        positive_rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kDegenerateLabels, "AUC needs both positive and negative labels");
  }
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double ece(std::span<const double> scores, std::span<const int> labels, int bins) {
  check_lengths(scores.size(), labels.size());
  if (scores.empty()) throw Error(ErrorCode::kEmptyInput, "ECE of an empty set");
  if (bins < 1) throw Error(ErrorCode::kInvalidArgument, "ECE needs at least one bin");
  std::vector<double> score_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> label_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores[i], 0.0, 1.0);
    const int b = std::clamp(static_cast<int>(std::ceil(s * bins)) - 1, 0, bins - 1);
    score_sum[static_cast<std::size_t>(b)] += scores[i];
    label_sum[static_cast<std::size_t>(b)] += labels[i] != 0 ? 1.0 : 0.0;
    ++count[static_cast<std::size_t>(b)];
  }
  double total = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0) continue;
    total += std::abs(score_sum[b] - label_sum[b]);
  }
  return total / static_cast<double>(scores.size());
}

AccuracySplits accuracy_splits(std::span<const double> scores, std::span<const int> labels, double cutoff) {
  check_lengths(scores.size(), labels.size());
  std::size_t pos = 0, pos_hit = 0, neg = 0, neg_hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0) {
      ++pos;
      if (scores[i] >= cutoff) ++pos_hit;
    } else {
      ++neg;
      if (scores[i] < cutoff) ++neg_hit;
    }
  }
  AccuracySplits out;
  if (pos) out.when_correct = static_cast<double>(pos_hit) / static_cast<double>(pos);
  if (neg) out.when_incorrect = static_cast<double>(neg_hit) / static_cast<double>(neg);
  return out;
}

PartitionMetrics partition_metrics(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  PartitionMetrics m;
  m.count = scores.size();
  m.positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; }));
  if (m.count == 0) return m;
  if (m.positives > 0 && m.positives < m.count) m.auc = auc(scores, labels);
  m.ece = ece(scores, labels);
  m.accuracy = accuracy_splits(scores, labels);
  return m;
}

void write_report(const EvalReport& report, std::ostream& out) {
  out << "model=" << report.model << '\n';
  write_partition("seen", report.seen, out);
  write_partition("unseen", report.unseen, out);
  write_partition("all", report.all, out);
}

std::string report_json(const EvalReport& report) {
  const nlohmann::json j = {{"version", "v1"},
                            {"model", report.model},
                            {"seen", partition_json(report.seen)},
                            {"unseen", partition_json(report.unseen)},
                            {"all", partition_json(report.all)}};
  return j.dump();
}

std::vector<EvalRun> evaluate(std::span<const StudentModel* const> models, std::span<const StudyRecord> chronological,
                              std::size_t eval_begin) {
  if (eval_begin >= chronological.size()) throw Error(ErrorCode::kEmptySplit, "evaluation split is empty");
  std::vector<EvalRun> runs(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) runs[m].report.model = models[m]->tag();

  std::unordered_map<std::string, UserState, StringHash, std::equal_to<>> users;
  CardAggregates aggregates;
  for (std::size_t i = 0; i < chronological.size(); ++i) {
    const StudyRecord& r = chronological[i];
    auto it = users.find(r.user_id);
    if (it == users.end()) it = users.emplace(r.user_id, UserState(r.user_id)).first;
    if (i >= eval_begin) {
      const bool seen = it->second.card(r.card_id) != nullptr;
      for (std::size_t m = 0; m < models.size(); ++m) {
        const double p = models[m]->predict(it->second, aggregates, r.card_id, r.timestamp);
        runs[m].predictions.push_back({i, p, r.correct, seen});
      }
    }
    it->second.apply(r);
    aggregates.add(r.card_id, r.correct);
  }

  for (EvalRun& run : runs) {
    std::vector<double> scores[2];
    std::vector<int> labels[2];
    std::vector<double> all_scores;
    std::vector<int> all_labels;
    for (const EvalPrediction& p : run.predictions) {
      scores[p.seen].push_back(p.score);
      labels[p.seen].push_back(p.label ? 1 : 0);
      all_scores.push_back(p.score);
      all_labels.push_back(p.label ? 1 : 0);
    }
    run.report.unseen = partition_metrics(scores[0], labels[0]);
    run.report.seen = partition_metrics(scores[1], labels[1]);
    run.report.all = partition_metrics(all_scores, all_labels);
  }
  return runs;
}

EvalRun evaluate(const StudentModel& model, std::span<const StudyRecord> chronological, std::size_t eval_begin) {
  const StudentModel* models[] = {&model};
  return std::move(evaluate(models, chronological, eval_begin).front());
}

std::size_t train_count(std::size_t n, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "split ratio must be in [0, 1]");
  // Exact integer ceil for ratios with a short decimal expansion, e.g. 0.75.
  const double raw = ratio * static_cast<double>(n);
  const double nearest = std::round(raw);
  const auto count = std::abs(raw - nearest) < 1e-9 ? nearest : std::ceil(raw);
  return std::min(n, static_cast<std::size_t>(count));
}

ForgettingCurve forgetting_curve(const StudentModel& model, const UserState& user, const CardAggregatesView& cards,
                                 std::string_view card_id, Timestamp start) {
  ForgettingCurve curve;
  curve.card_id = std::string(card_id);
  curve.points.reserve(kCurveDays + 1);
  for (int d = 0; d <= kCurveDays; ++d) {
    curve.points.push_back({d, model.predict(user, cards, card_id, start + d * kSecondsPerDay)});
  }
  return curve;
}

void validate(const SyntheticStudentSpec& spec) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, "synthetic spec: " + what); };
  if (spec.clusters < 1) fail("clusters must be >= 1");
  if (spec.embedding_dim < 1) fail("embedding_dim must be >= 1");
  if (spec.base_knowledge.empty()) fail("base_knowledge is empty");
  for (double p : spec.base_knowledge) {
    if (!(p > 0.0 && p < 1.0)) fail("base_knowledge entries must be in (0, 1)");
  }
  if (!(spec.half_life_days > 0.0)) fail("half_life_days must be positive");
  if (!(spec.half_life_growth > 0.0)) fail("half_life_growth must be positive");
  if (spec.user_spread < 0 || spec.difficulty_spread < 0 || spec.embedding_noise < 0 || spec.half_life_sigma < 0) {
    fail("spreads must be non-negative");
  }
  if (!(spec.new_card_rate > 0.0 && spec.new_card_rate <= 1.0)) fail("new_card_rate must be in (0, 1]");
  if (spec.focus_clusters_min < 1 || spec.focus_clusters_max < spec.focus_clusters_min) {
    fail("focus cluster range is invalid");
  }
  if (spec.session_length < 1) fail("session_length must be >= 1");
}

SyntheticCorpus generate_synthetic(const SyntheticStudentSpec& spec, std::size_t n_users, std::size_t n_cards,
                                   std::size_t n_records) {
  validate(spec);
  if (n_cards < 1 || n_users < 1) throw Error(ErrorCode::kInvalidArgument, "synthetic corpus needs users and cards");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t dim = spec.embedding_dim;
  const auto clusters = static_cast<std::size_t>(spec.clusters);

  auto random_unit = [&] {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (double& x : v) {
      x = gauss(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  };
  std::vector<std::vector<double>> centroids;
  for (std::size_t c = 0; c < clusters; ++c) centroids.push_back(random_unit());
  const std::vector<double> difficulty_axis = random_unit();

  SyntheticCorpus out;
  out.embeddings = std::make_shared<EmbeddingStore>(dim);
  std::vector<std::vector<std::size_t>> members(clusters);
  const int width = static_cast<int>(std::to_string(n_cards).size());
  for (std::size_t i = 0; i < n_cards; ++i) {
    const std::size_t c = i % clusters;
    const double difficulty = spec.difficulty_spread * gauss(rng);
    std::string num = std::to_string(i);
    std::string id = "c" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    std::vector<float> e(dim);
    const double noise_scale = spec.embedding_noise / std::sqrt(static_cast<double>(dim));
    for (std::size_t d = 0; d < dim; ++d) {
      e[d] = static_cast<float>(centroids[c][d] + noise_scale * gauss(rng) +
                                spec.difficulty_signal * difficulty * difficulty_axis[d]);
    }
    out.embeddings->add(id, e);
    out.cards.push_back({id, "topic " + std::to_string(c) + " item " + num, "answer " + num,
                         "topic-" + std::to_string(c), "Topic " + std::to_string(c)});
    out.cluster.push_back(static_cast<int>(c));
    out.difficulty.push_back(difficulty);
    members[c].push_back(i);
  }

  struct Pending {
    StudyRecord record;
    double recall;
    std::size_t user;
    std::size_t seq;
  };
  std::vector<Pending> pending;
  pending.reserve(n_records);
  const int uwidth = static_cast<int>(std::to_string(n_users).size());

  for (std::size_t u = 0; u < n_users; ++u) {
    const std::size_t quota = n_records / n_users + (u < n_records % n_users ? 1 : 0);
    std::string num = std::to_string(u);
    const std::string user_id = "u" + std::string(static_cast<std::size_t>(uwidth) - num.size(), '0') + num;

    std::vector<std::size_t> cluster_order(clusters);
    std::iota(cluster_order.begin(), cluster_order.end(), std::size_t{0});
    std::shuffle(cluster_order.begin(), cluster_order.end(), rng);
    const int span = spec.focus_clusters_max - spec.focus_clusters_min + 1;
    const auto focus_count = std::min<std::size_t>(
        clusters, static_cast<std::size_t>(spec.focus_clusters_min + static_cast<int>(rng() % span)));
    std::vector<std::size_t> focus(cluster_order.begin(), cluster_order.begin() + focus_count);

    std::vector<double> offset(clusters);
    for (double& o : offset) o = spec.user_spread * gauss(rng);
    std::vector<std::size_t> cluster_studies(clusters, 0);
    std::vector<std::vector<std::size_t>> fresh(clusters);
    for (std::size_t c : focus) {
      fresh[c] = members[c];
      std::shuffle(fresh[c].begin(), fresh[c].end(), rng);
    }

    struct Memory {
      double half_life_days;
      Timestamp last;
    };
    std::unordered_map<std::size_t, Memory> memory;
    std::vector<std::size_t> studied;

    Timestamp t = spec.start + static_cast<Timestamp>(unit(rng) * 3.0 * kSecondsPerDay);
    std::size_t previous = n_cards;
    for (std::size_t n = 0; n < quota; ++n) {
      if (n > 0 && n % spec.session_length == 0) {
        t += static_cast<Timestamp>((0.5 + std::exponential_distribution<double>(1.0)(rng)) * kSecondsPerDay);
      } else if (n > 0) {
        t += 15 + static_cast<Timestamp>(rng() % 46);
      }
      std::vector<std::size_t> open;
      for (std::size_t c : focus) {
        if (!fresh[c].empty()) open.push_back(c);
      }
      std::size_t card;
      const bool can_review = studied.size() > 1 || (studied.size() == 1 && studied[0] != previous);
      if (!open.empty() && (!can_review || unit(rng) < spec.new_card_rate)) {
        const std::size_t c = open[rng() % open.size()];
        card = fresh[c].back();
        fresh[c].pop_back();
        studied.push_back(card);
      } else {
        do {
          card = studied[rng() % studied.size()];
        } while (card == previous && studied.size() > 1);
      }
      const std::size_t c = static_cast<std::size_t>(out.cluster[card]);
      const double base = spec.base_knowledge[c % spec.base_knowledge.size()];
      const double know = sigmoid(logit(base) + offset[c] - out.difficulty[card] +
                                  spec.learning_increment * std::log1p(static_cast<double>(cluster_studies[c])));
      double recall = know;
      auto mem = memory.find(card);
      if (mem != memory.end()) {
        const double elapsed = days_between(mem->second.last, t);
        recall = know + (1.0 - know) * std::exp2(-elapsed / mem->second.half_life_days);
      }
      const bool correct = unit(rng) < recall;
      if (mem == memory.end()) {
        const double h = spec.half_life_days * std::exp(spec.half_life_sigma * gauss(rng));
        mem = memory.emplace(card, Memory{h, t}).first;
      } else if (correct) {
        mem->second.half_life_days *= spec.half_life_growth;
      }
      mem->second.last = t;
      ++cluster_studies[c];
      previous = card;
      pending.push_back({StudyRecord{user_id, out.cards[card].card_id, t, correct,
                                     4000 + static_cast<std::int64_t>(rng() % 8000), out.cards[card].deck_id},
                         recall, u, n});
    }
  }

  std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    if (a.record.timestamp != b.record.timestamp) return a.record.timestamp < b.record.timestamp;
    if (a.user != b.user) return a.user < b.user;
    return a.seq < b.seq;
  });
  out.records.reserve(pending.size());
  out.recall.reserve(pending.size());
  for (Pending& p : pending) {
    out.records.push_back(std::move(p.record));
    out.recall.push_back(p.recall);
  }
  return out;
}

}  // namespace mnemo
