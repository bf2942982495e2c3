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

#include <random>

#include "mnemo/network.hpp"

namespace {

Eigen::MatrixXd inputs(std::size_t rows, std::size_t cols) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = g(rng);
  }
  return x;
}

// Input width of the default layout on 768-d embeddings with k = 5.
constexpr std::size_t kWidth = 768 + 24 + 5 * (768 + 24 + 1);

void BM_ForwardEval(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const auto p = mnemo::NetworkParams::initialize(kWidth, hidden, 0.1, 1);
  const Eigen::MatrixXd x = inputs(64, kWidth);
  for (auto _ : state) benchmark::DoNotOptimize(mnemo::forward(p, x, false, nullptr));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardEval)->Arg(64)->Arg(768);

void BM_ForwardBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const auto p = mnemo::NetworkParams::initialize(kWidth, hidden, 0.1, 1);
  const Eigen::MatrixXd x = inputs(64, kWidth);
  const std::vector<double> y(64, 1.0);
  std::mt19937_64 rng(3);
  for (auto _ : state) {
    mnemo::ForwardCache cache;
    mnemo::forward(p, x, true, &rng, &cache);
    benchmark::DoNotOptimize(mnemo::backward(p, cache, y));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(768);

}  // namespace
