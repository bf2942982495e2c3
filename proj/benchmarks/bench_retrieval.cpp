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

#include <numeric>
#include <random>

#include "mnemo/retrieval.hpp"

namespace {

mnemo::EmbeddingStore make_store(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g;
  mnemo::EmbeddingStore store(dim);
  std::vector<float> v(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (float& x : v) x = g(rng);
    store.add("c" + std::to_string(i), v);
  }
  return store;
}

void BM_TopK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const mnemo::EmbeddingStore store = make_store(n, 768);
  std::vector<std::size_t> cand(n);
  std::iota(cand.begin(), cand.end(), 0);
  const auto query = store.row(0);
  for (auto _ : state) benchmark::DoNotOptimize(mnemo::topk_indices(store, cand, query, k));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_TopK)->Args({100, 5})->Args({1000, 5})->Args({10000, 5})->Args({10000, 20});

}  // namespace
