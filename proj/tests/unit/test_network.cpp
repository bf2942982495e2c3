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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mnemo/network.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace mnemo {
namespace {

NetworkParams random_net(std::size_t in, std::size_t hidden, double dropout, std::uint64_t seed) {
  NetworkParams p = NetworkParams::initialize(in, hidden, dropout, seed);
  std::mt19937_64 rng(seed + 1000);
  std::normal_distribution<double> n(0.0, 0.3);
  for (Eigen::Index i = 0; i < p.b1.size(); ++i) {
    p.b1(i) = n(rng);
    p.ln_gain(i) = 1.0 + n(rng);
    p.ln_bias(i) = n(rng);
  }
  p.b2 = n(rng);
  return p;
}

Eigen::MatrixXd random_inputs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = n(rng);
  }
  return x;
}

TEST(Network, GeluReferenceValues) {
  EXPECT_NEAR(gelu(0.0), 0.0, 1e-15);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(gelu(-1.0), -0.15865525393145707, 1e-15);
  for (double x : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
    const double h = 1e-5;
    EXPECT_NEAR(gelu_derivative(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-9);
  }
}

TEST(Network, AssembleLayout) {
  InputLayout layout{2, 3, 2};
  EXPECT_EQ(layout.block_width(), 6u);
  EXPECT_EQ(layout.width(), 17u);
  const std::vector<float> e0{1, 2}, e1{3, 4};
  const std::vector<double> f0{5, 6, 7}, f1{8, 9, 10};
  const std::vector<RetrievedBlock> blocks{{e1, f1, true}};
  const auto x = assemble(layout, e0, f0, blocks);
  const std::vector<double> want{1, 2, 5, 6, 7, 3, 4, 8, 9, 10, 1, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(x, want);
  const std::vector<RetrievedBlock> too_many{{e1, f1, true}, {e1, f1, true}, {e1, f1, true}};
  EXPECT_MNEMO_ERROR(assemble(layout, e0, f0, too_many), ErrorCode::kDimensionMismatch);
  EXPECT_MNEMO_ERROR(assemble(layout, e0, std::vector<double>{1}, blocks), ErrorCode::kDimensionMismatch);
}

TEST(Network, ForwardMatchesScalarLoops) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const NetworkParams p = random_net(7, 13, 0.1, seed);
    const Eigen::MatrixXd x = random_inputs(6, 7, seed + 50);
    const Eigen::VectorXd got = forward(p, x, false, nullptr);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      std::vector<double> in(7);
      for (int c = 0; c < 7; ++c) in[c] = x(r, c);
      EXPECT_NEAR(got(r), oracle::scalar_forward(p, in), 1e-12);
      EXPECT_NEAR(forward_one(p, in, false, nullptr), got(r), 1e-15);
    }
  }
}

TEST(Network, BackwardMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const NetworkParams p = random_net(6, 9, seed % 2 ? 0.2 : 0.0, seed);
    const Eigen::MatrixXd x = random_inputs(4, 6, seed + 7);
    const std::vector<double> y{1, 0, 1, 1};
    std::mt19937_64 rng(99 + seed);
    ForwardCache cache;
    forward(p, x, true, &rng, &cache);
    const std::vector<double> analytic = backward(p, cache, y).flatten();
    const std::vector<double> numeric = oracle::numeric_gradient(p, x, y, 99 + seed, 1e-3);
    ASSERT_EQ(analytic.size(), numeric.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
      EXPECT_LT(std::abs(analytic[i] - numeric[i]) / denom, 1e-4) << "seed " << seed << " param " << i;
    }
  }
}

TEST(Network, FlattenRoundTrip) {
  const NetworkParams p = random_net(3, 4, 0.1, 1);
  NetworkParams q = NetworkParams::zeros(3, 4);
  q.unflatten(p.flatten());
  EXPECT_EQ(q.flatten(), p.flatten());
  EXPECT_EQ(p.parameter_count(), 4u * 3 + 4 * 4 + 1);
  EXPECT_MNEMO_ERROR(q.unflatten(std::vector<double>(3)), ErrorCode::kDimensionMismatch);
}

TEST(Network, BceClamp) {
  EXPECT_NEAR(bce_loss(0.5, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(0.0, 1.0), -std::log(1e-7), 1e-9);
  EXPECT_NEAR(bce_loss(1.0, 0.0), -std::log(1e-7), 1e-6);
}

TEST(Network, AdamMatchesScalarRecurrence) {
  NetworkParams p = random_net(2, 3, 0.0, 4);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  AdamOptimizer adam(p, cfg);
  std::vector<double> theta = p.flatten();
  std::vector<double> m(theta.size()), v(theta.size());
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  for (int t = 1; t <= 3; ++t) {
    std::vector<double> g(theta.size());
    for (double& x : g) x = n(rng);
    NetworkParams grad = NetworkParams::zeros(2, 3);
    grad.unflatten(g);
    adam.step(p, grad);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      theta[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  const std::vector<double> got = p.flatten();
  for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_NEAR(got[i], theta[i], 1e-14);
  EXPECT_EQ(adam.steps(), 3);
}

struct Toy {
  Eigen::MatrixXd x;
  std::vector<double> y;
};

Toy toy(std::size_t n) {
  Toy t{random_inputs(n, 4, 3), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) t.y[i] = t.x(static_cast<Eigen::Index>(i), 0) + 0.5 * t.x(i, 2) > 0 ? 1 : 0;
  return t;
}

BatchFiller filler(const Toy& t) {
  return [&t](std::span<const std::size_t> rows, Eigen::MatrixXd& in, std::vector<double>& labels) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      in.row(static_cast<Eigen::Index>(i)) = t.x.row(static_cast<Eigen::Index>(rows[i]));
      labels[i] = t.y[rows[i]];
    }
  };
}

TEST(Network, TrainingLearnsSeparableToy) {
  const Toy t = toy(400);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.hidden_width = 16;
  NetworkParams p = NetworkParams::initialize(4, 16, 0.0, 1);
  int calls = 0;
  const auto losses = train_network(p, 400, filler(t), cfg, [&](int, double) { ++calls; });
  EXPECT_EQ(calls, 30);
  EXPECT_LT(losses.back(), 0.2);
  EXPECT_LT(losses.back(), losses.front());
}

TEST(Network, TrainingIsDeterministicAndZeroRateIsIdentity) {
  const Toy t = toy(100);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 2;
  cfg.hidden_width = 8;
  NetworkParams a = NetworkParams::initialize(4, 8, 0.1, 5), b = a;
  train_network(a, 100, filler(t), cfg);
  train_network(b, 100, filler(t), cfg);
  EXPECT_EQ(a.flatten(), b.flatten());
  cfg.learning_rate = 0.0;
  NetworkParams c = NetworkParams::initialize(4, 8, 0.1, 5);
  const auto before = c.flatten();
  train_network(c, 100, filler(t), cfg);
  EXPECT_EQ(c.flatten(), before);
  EXPECT_MNEMO_ERROR(train_network(c, 0, filler(t), cfg), ErrorCode::kEmptySplit);
  cfg.dropout = 1.0;
  EXPECT_MNEMO_ERROR(train_network(c, 100, filler(t), cfg), ErrorCode::kInvalidArgument);
}

TEST(Network, NonfiniteInputsRejected) {
  const NetworkParams p = random_net(2, 3, 0.0, 1);
  Eigen::MatrixXd x(1, 2);
  x << NAN, 1.0;
  EXPECT_MNEMO_ERROR(forward(p, x, false, nullptr), ErrorCode::kNonfiniteActivation);
  EXPECT_MNEMO_ERROR(forward(p, Eigen::MatrixXd::Zero(1, 5), false, nullptr), ErrorCode::kDimensionMismatch);
}

TEST(Network, RoundToFloatIsIdempotent) {
  NetworkParams p = random_net(3, 4, 0.1, 2);
  round_to_float(p);
  const auto once = p.flatten();
  round_to_float(p);
  EXPECT_EQ(p.flatten(), once);
  for (double v : once) EXPECT_EQ(static_cast<double>(static_cast<float>(v)), v);
}

}  // namespace
}  // namespace mnemo
