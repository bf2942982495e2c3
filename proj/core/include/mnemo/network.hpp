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

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace mnemo {

inline constexpr std::size_t kHiddenWidth = 768;
inline constexpr double kLayerNormEpsilon = 1e-5;
inline constexpr double kProbabilityClamp = 1e-7;

// Input row: [card embedding | card features | k x (embedding | features |
// last-response bit)]. Missing retrieved blocks are zero.
struct InputLayout {
  std::size_t embedding_dim = 0;  // 0 when embeddings are ablated
  std::size_t feature_count = 0;
  std::size_t k = 0;

  std::size_t block_width() const { return embedding_dim + feature_count + 1; }
  std::size_t width() const { return embedding_dim + feature_count + k * block_width(); }

  friend bool operator==(const InputLayout&, const InputLayout&) = default;
};

struct RetrievedBlock {
  std::span<const float> embedding;
  std::span<const double> features;
  bool last_correct = false;
};

// Blocks are written in the order given (callers pass descending retrieval
// score). Throws kDimensionMismatch on any width disagreement or more than k
// blocks.
void assemble_into(const InputLayout& layout, std::span<const float> card_embedding,
                   std::span<const double> card_features, std::span<const RetrievedBlock> retrieved,
                   std::span<double> out);
std::vector<double> assemble(const InputLayout& layout, std::span<const float> card_embedding,
                             std::span<const double> card_features, std::span<const RetrievedBlock> retrieved);

/// Parameters of the recall classifier. Also used as the gradient container,
/// in which case `dropout` is ignored.
struct NetworkParams {
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::VectorXd ln_gain;
  Eigen::VectorXd ln_bias;
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;
  double dropout = 0.1;

  // Xavier-uniform weights, zero biases, unit layer-norm gain.
  static NetworkParams initialize(std::size_t input_width, std::size_t hidden_width, double dropout,
                                  std::uint64_t seed);
  static NetworkParams zeros(std::size_t input_width, std::size_t hidden_width);

  std::size_t input_width() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden_width() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t parameter_count() const;

  // Flat views in a fixed order (w1 column-major, b1, gain, bias, w2, b2).
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

struct ForwardCache {
  Eigen::MatrixXd input;        // after input dropout
  Eigen::MatrixXd input_mask;   // scaled keep-mask; empty in eval mode
  Eigen::MatrixXd pre;          // x W1^T + b1
  Eigen::MatrixXd normalized;   // layer-norm output before gain/bias
  Eigen::VectorXd inv_std;      // per row
  Eigen::MatrixXd hidden;       // after gain/bias and hidden dropout
  Eigen::MatrixXd hidden_mask;  // empty in eval mode
  Eigen::VectorXd probabilities;
};

double gelu(double x);
double gelu_derivative(double x);

// Forward pass over a batch (one row per example). Dropout is applied only in
// train mode and draws from `rng`, which may be null in eval mode. Throws
// kNonfiniteActivation, kDimensionMismatch.
Eigen::VectorXd forward(const NetworkParams& params, const Eigen::MatrixXd& inputs, bool train_mode,
                        std::mt19937_64* rng, ForwardCache* cache = nullptr);
double forward_one(const NetworkParams& params, std::span<const double> input, bool train_mode,
                   std::mt19937_64* rng, ForwardCache* cache = nullptr);

// Binary cross-entropy with the probability clamped to [1e-7, 1 - 1e-7].
double bce_loss(double probability, double label);

// Gradient of the mean BCE over the cached batch, dropout masks held fixed.
// Predictions pinned by the clamp contribute zero gradient.
NetworkParams backward(const NetworkParams& params, const ForwardCache& cache, std::span<const double> labels);

struct TrainConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 64;
  int epochs = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dropout = 0.1;
  std::size_t hidden_width = kHiddenWidth;
  std::uint64_t seed = 0;
};

// Throws kInvalidArgument unless learning_rate >= 0, batch_size >= 1,
// dropout in [0, 1).
void validate(const TrainConfig& config);

class AdamOptimizer {
 public:
  AdamOptimizer(const NetworkParams& shape, const TrainConfig& config);
  void step(NetworkParams& params, const NetworkParams& gradients);
  long steps() const { return t_; }

 private:
  NetworkParams m_;
  NetworkParams v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

// Fills `inputs` (rows x input width) and `labels` for the given example rows.
using BatchFiller = std::function<void(std::span<const std::size_t> rows, Eigen::MatrixXd& inputs,
                                       std::vector<double>& labels)>;
// Called after each epoch with the 1-based epoch and the mean training loss.
using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Mini-batch Adam over `example_count` rows, reshuffled every epoch from
// config.seed. Returns the per-epoch mean loss. Throws kEmptySplit when there
// are no rows and kNonfiniteActivation if the loss diverges.
std::vector<double> train_network(NetworkParams& params, std::size_t example_count, const BatchFiller& fill,
                                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Rounds every parameter through float32, the checkpoint precision.
void round_to_float(NetworkParams& params);

}  // namespace mnemo
