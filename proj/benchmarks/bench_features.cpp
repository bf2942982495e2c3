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

#include <benchmark/benchmark.h>

#include <map>

#include "mnemo/eval.hpp"
#include "mnemo/features.hpp"

namespace {

const std::vector<mnemo::StudyRecord>& records() {
  static const auto corpus = [] {
    mnemo::SyntheticStudentSpec spec;
    return mnemo::generate_synthetic(spec, 50, 2000, 50000);
  }();
  return corpus.records;
}

// Extract-then-apply over the whole log, as the evaluator does.
void BM_FeatureReplay(benchmark::State& state) {
  const auto& log = records();
  for (auto _ : state) {
    std::map<std::string, mnemo::UserState> users;
    mnemo::CardAggregates agg;
    double sink = 0;
    for (const auto& r : log) {
      auto& u = users.try_emplace(r.user_id, r.user_id).first->second;
      sink += mnemo::extract(u, r.card_id, r.timestamp, agg)[mnemo::Feature::kAccUser];
      u.apply(r);
      agg.add(r.card_id, r.correct);
    }
    benchmark::DoNotOptimize(sink);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(log.size()));
}
BENCHMARK(BM_FeatureReplay)->Unit(benchmark::kMillisecond);

}  // namespace
