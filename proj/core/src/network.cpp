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

#include "mnemo/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mnemo/error.hpp"

namespace mnemo {
namespace {

void check_width(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + " has width " + std::to_string(got) + ", expected " + std::to_string(want));
  }
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  Eigen::MatrixXd mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  // Row-major draw order keeps masks independent of Eigen's storage order.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = keep(rng) ? scale : 0.0;
  }
  return mask;
}

}  // namespace

void assemble_into(const InputLayout& layout, std::span<const float> card_embedding,
                   std::span<const double> card_features, std::span<const RetrievedBlock> retrieved,
                   std::span<double> out) {
  check_width(out.size(), layout.width(), "assembled input");
  check_width(card_embedding.size(), layout.embedding_dim, "card embedding");
  check_width(card_features.size(), layout.feature_count, "card features");
  if (retrieved.size() > layout.k) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(retrieved.size()) + " retrieved blocks for k=" + std::to_string(layout.k));
  }
  std::fill(out.begin(), out.end(), 0.0);
  auto cursor = out.begin();
  cursor = std::copy(card_embedding.begin(), card_embedding.end(), cursor);
  cursor = std::copy(card_features.begin(), card_features.end(), cursor);
  for (const RetrievedBlock& block : retrieved) {
    check_width(block.embedding.size(), layout.embedding_dim, "retrieved embedding");
    check_width(block.features.size(), layout.feature_count, "retrieved features");
    cursor = std::copy(block.embedding.begin(), block.embedding.end(), cursor);
    cursor = std::copy(block.features.begin(), block.features.end(), cursor);
    *cursor++ = block.last_correct ? 1.0 : 0.0;
  }
}

std::vector<double> assemble(const InputLayout& layout, std::span<const float> card_embedding,
                             std::span<const double> card_features, std::span<const RetrievedBlock> retrieved) {
  std::vector<double> out(layout.width());
  assemble_into(layout, card_embedding, card_features, retrieved, out);
  return out;
}

NetworkParams NetworkParams::zeros(std::size_t input_width, std::size_t hidden_width) {
  NetworkParams p;
  const auto in = static_cast<Eigen::Index>(input_width);
  const auto h = static_cast<Eigen::Index>(hidden_width);
  p.w1 = Eigen::MatrixXd::Zero(h, in);
  p.b1 = Eigen::VectorXd::Zero(h);
  p.ln_gain = Eigen::VectorXd::Zero(h);
  p.ln_bias = Eigen::VectorXd::Zero(h);
  p.w2 = Eigen::VectorXd::Zero(h);
  p.b2 = 0.0;
  return p;
}

NetworkParams NetworkParams::initialize(std::size_t input_width, std::size_t hidden_width, double dropout,
                                        std::uint64_t seed) {
  NetworkParams p = zeros(input_width, hidden_width);
  p.dropout = dropout;
  p.ln_gain.setOnes();
  std::mt19937_64 rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(input_width + hidden_width));
  std::uniform_real_distribution<double> u1(-a1, a1);
  for (Eigen::Index r = 0; r < p.w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.w1.cols(); ++c) p.w1(r, c) = u1(rng);
  }
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden_width + 1));
  std::uniform_real_distribution<double> u2(-a2, a2);
  for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2(i) = u2(rng);
  return p;
}

std::size_t NetworkParams::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + ln_gain.size() + ln_bias.size() + w2.size() + 1);
}

std::vector<double> NetworkParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  auto push = [&](const auto& m) { flat.insert(flat.end(), m.data(), m.data() + m.size()); };
  push(w1);
  push(b1);
  push(ln_gain);
  push(ln_bias);
  push(w2);
  flat.push_back(b2);
  return flat;
}

void NetworkParams::unflatten(std::span<const double> flat) {
  check_width(flat.size(), parameter_count(), "flat parameter vector");
  const double* p = flat.data();
  auto pull = [&](auto& m) {
    std::copy(p, p + m.size(), m.data());
    p += m.size();
  };
  pull(w1);
  pull(b1);
  pull(ln_gain);
  pull(ln_bias);
  pull(w2);
  b2 = *p;
}

double gelu(double x) { return 0.5 * x * std::erfc(-x / std::numbers::sqrt2); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Eigen::VectorXd forward(const NetworkParams& params, const Eigen::MatrixXd& inputs, bool train_mode,
                        std::mt19937_64* rng, ForwardCache* cache) {
  check_width(static_cast<std::size_t>(inputs.cols()), params.input_width(), "network input");
  const bool drop = train_mode && params.dropout > 0.0;
  if (drop && rng == nullptr) throw Error(ErrorCode::kInvalidArgument, "train-mode forward needs an rng");
  const Eigen::Index batch = inputs.rows();
  const Eigen::Index hidden = static_cast<Eigen::Index>(params.hidden_width());

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  if (drop) {
    c.input_mask = dropout_mask(batch, inputs.cols(), params.dropout, *rng);
    c.input = inputs.cwiseProduct(c.input_mask);
  } else {
    c.input_mask.resize(0, 0);
    c.input = inputs;
  }
  c.pre.noalias() = c.input * params.w1.transpose();
  c.pre.rowwise() += params.b1.transpose();

  Eigen::MatrixXd act = c.pre.unaryExpr([](double z) { return gelu(z); });
  c.normalized.resize(batch, hidden);
  c.inv_std.resize(batch);
  for (Eigen::Index r = 0; r < batch; ++r) {
    const double mean = act.row(r).mean();
    const double var = (act.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    c.inv_std(r) = inv;
    c.normalized.row(r) = (act.row(r).array() - mean) * inv;
  }
  c.hidden = (c.normalized.array().rowwise() * params.ln_gain.transpose().array()).matrix();
  c.hidden.rowwise() += params.ln_bias.transpose();
  if (drop) {
    c.hidden_mask = dropout_mask(batch, hidden, params.dropout, *rng);
    c.hidden = c.hidden.cwiseProduct(c.hidden_mask);
  } else {
    c.hidden_mask.resize(0, 0);
  }
  Eigen::VectorXd logits = c.hidden * params.w2;
  logits.array() += params.b2;
  c.probabilities = logits.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
  if (!c.probabilities.allFinite() || !logits.allFinite()) {
    throw Error(ErrorCode::kNonfiniteActivation, "non-finite classifier output");
  }
  return c.probabilities;
}

double forward_one(const NetworkParams& params, std::span<const double> input, bool train_mode,
                   std::mt19937_64* rng, ForwardCache* cache) {
  Eigen::MatrixXd row = Eigen::Map<const Eigen::RowVectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  return forward(params, row, train_mode, rng, cache)(0);
}

double bce_loss(double probability, double label) {
  const double p = std::clamp(probability, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

NetworkParams backward(const NetworkParams& params, const ForwardCache& cache, std::span<const double> labels) {
  const Eigen::Index batch = cache.probabilities.size();
  check_width(labels.size(), static_cast<std::size_t>(batch), "label vector");
  const Eigen::Index hidden = static_cast<Eigen::Index>(params.hidden_width());
  NetworkParams g = NetworkParams::zeros(params.input_width(), params.hidden_width());

  Eigen::VectorXd dlogit(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double p = cache.probabilities(i);
    const bool clamped = p < kProbabilityClamp || p > 1.0 - kProbabilityClamp;
    dlogit(i) = clamped ? 0.0 : (p - labels[static_cast<std::size_t>(i)]) / static_cast<double>(batch);
  }
  g.b2 = dlogit.sum();
  g.w2.noalias() = cache.hidden.transpose() * dlogit;

  Eigen::MatrixXd dy = dlogit * params.w2.transpose();  // batch x hidden
  if (cache.hidden_mask.size() > 0) dy = dy.cwiseProduct(cache.hidden_mask);
  g.ln_gain = (dy.cwiseProduct(cache.normalized)).colwise().sum().transpose();
  g.ln_bias = dy.colwise().sum().transpose();

  Eigen::MatrixXd dxhat = (dy.array().rowwise() * params.ln_gain.transpose().array()).matrix();
  Eigen::MatrixXd dz(batch, hidden);
  const double h = static_cast<double>(hidden);
  for (Eigen::Index r = 0; r < batch; ++r) {
    const double sum_d = dxhat.row(r).sum();
    const double sum_dx = dxhat.row(r).dot(cache.normalized.row(r));
    for (Eigen::Index j = 0; j < hidden; ++j) {
      const double da = cache.inv_std(r) / h * (h * dxhat(r, j) - sum_d - cache.normalized(r, j) * sum_dx);
      dz(r, j) = da * gelu_derivative(cache.pre(r, j));
    }
  }
  g.w1.noalias() = dz.transpose() * cache.input;
  g.b1 = dz.colwise().sum().transpose();
  return g;
}

void validate(const TrainConfig& config) {
  if (!(config.learning_rate >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be >= 0");
  if (config.batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "dropout must be in [0, 1)");
  }
  if (config.epochs < 0) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 0");
  if (config.hidden_width < 1) throw Error(ErrorCode::kInvalidArgument, "hidden width must be >= 1");
}

AdamOptimizer::AdamOptimizer(const NetworkParams& shape, const TrainConfig& config)
    : m_(NetworkParams::zeros(shape.input_width(), shape.hidden_width())),
      v_(NetworkParams::zeros(shape.input_width(), shape.hidden_width())),
      lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.epsilon) {}

void AdamOptimizer::step(NetworkParams& params, const NetworkParams& gradients) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](auto param, auto m, auto v, const auto& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.square();
    param -= lr_ * (m / c1) / ((v / c2).sqrt() + eps_);
  };
  update(params.w1.array(), m_.w1.array(), v_.w1.array(), gradients.w1.array());
  update(params.b1.array(), m_.b1.array(), v_.b1.array(), gradients.b1.array());
  update(params.ln_gain.array(), m_.ln_gain.array(), v_.ln_gain.array(), gradients.ln_gain.array());
  update(params.ln_bias.array(), m_.ln_bias.array(), v_.ln_bias.array(), gradients.ln_bias.array());
  update(params.w2.array(), m_.w2.array(), v_.w2.array(), gradients.w2.array());
  m_.b2 = beta1_ * m_.b2 + (1.0 - beta1_) * gradients.b2;
  v_.b2 = beta2_ * v_.b2 + (1.0 - beta2_) * gradients.b2 * gradients.b2;
  params.b2 -= lr_ * (m_.b2 / c1) / (std::sqrt(v_.b2 / c2) + eps_);
}

std::vector<double> train_network(NetworkParams& params, std::size_t example_count, const BatchFiller& fill,
                                  const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  if (example_count == 0) throw Error(ErrorCode::kEmptySplit, "no training examples");
  std::mt19937_64 rng(config.seed);
  AdamOptimizer adam(params, config);
  std::vector<std::size_t> order(example_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> losses;
  Eigen::MatrixXd inputs;
  std::vector<double> labels;
  ForwardCache cache;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < example_count; start += config.batch_size) {
      const std::size_t end = std::min(example_count, start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      inputs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(params.input_width()));
      labels.assign(rows.size(), 0.0);
      fill(rows, inputs, labels);
      const Eigen::VectorXd p = forward(params, inputs, true, &rng, &cache);
      for (std::size_t i = 0; i < rows.size(); ++i) total += bce_loss(p(static_cast<Eigen::Index>(i)), labels[i]);
      adam.step(params, backward(params, cache, labels));
    }
    const double mean = total / static_cast<double>(example_count);
    if (!std::isfinite(mean)) throw Error(ErrorCode::kNonfiniteActivation, "training loss diverged");
    losses.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return losses;
}

void round_to_float(NetworkParams& params) {
  auto round = [](auto& m) { m = m.template cast<float>().template cast<double>(); };
  round(params.w1);
  round(params.b1);
  round(params.ln_gain);
  round(params.ln_bias);
  round(params.w2);
  params.b2 = static_cast<float>(params.b2);
}

}  // namespace mnemo
