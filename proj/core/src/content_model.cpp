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

#include "mnemo/content_model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "mnemo/error.hpp"

namespace mnemo {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kCheckpointMagic[4] = {'M', 'N', 'C', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(ErrorCode::kCorruptCheckpoint, "truncated checkpoint");
  }
  return value;
}

EncodedCard encode_card(const EmbeddingStore& store, bool need_index, const UserState& user,
                        const CardAggregatesView& cards, std::string_view card_id, Timestamp now) {
  EncodedCard out;
  if (need_index) out.store_index = store.require(card_id);
  out.features = extract(user, card_id, now, cards);
  const UserCardState* uc = user.card(card_id);
  out.last_correct = uc && uc->last_correct;
  return out;
}

}  // namespace

std::string_view to_string(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::kTopK: return "topk";
    case RetrievalMode::kPastK: return "pastk";
    case RetrievalMode::kNone: return "none";
  }
  return "none";
}

RetrievalMode parse_retrieval_mode(std::string_view text) {
  if (text == "topk") return RetrievalMode::kTopK;
  if (text == "pastk") return RetrievalMode::kPastK;
  if (text == "none") return RetrievalMode::kNone;
  throw Error(ErrorCode::kInvalidArgument, "unknown retrieval mode '" + std::string(text) + "'");
}

InputLayout ModelLayout::input_layout(std::size_t embedding_dim) const {
  return {use_embeddings ? embedding_dim : 0, features.count(), effective_k()};
}

EncodedExample encode(const EmbeddingStore& store, const ModelLayout& layout, const UserState& user,
                      const CardAggregatesView& cards, std::string_view card_id, Timestamp now) {
  const bool topk = layout.retrieval == RetrievalMode::kTopK && layout.k > 0;
  EncodedExample ex;
  ex.card = encode_card(store, layout.use_embeddings || topk, user, cards, card_id, now);
  ex.seen = user.card(card_id) != nullptr;
  const std::size_t k = layout.effective_k();
  if (k == 0) return ex;

  std::vector<std::string_view> picked;
  if (topk) {
    std::vector<std::size_t> candidates;
    candidates.reserve(user.cards().size());
    for (const UserCardState& uc : user.cards()) {
      if (uc.card_id != card_id) candidates.push_back(store.require(uc.card_id));
    }
    const auto query = store.row(ex.card.store_index);
    for (const ScoredIndex& s : topk_indices(store, candidates, query, k)) {
      picked.push_back(store.card_id(s.store_index));
    }
  } else {
    std::vector<const UserCardState*> recent;
    for (const UserCardState& uc : user.cards()) {
      if (uc.card_id != card_id) recent.push_back(&uc);
    }
    const std::size_t keep = std::min(k, recent.size());
    std::partial_sort(recent.begin(), recent.begin() + static_cast<std::ptrdiff_t>(keep), recent.end(),
                      [](const UserCardState* a, const UserCardState* b) { return a->last_sequence > b->last_sequence; });
    for (std::size_t i = 0; i < keep; ++i) picked.push_back(recent[i]->card_id);
  }
  ex.retrieved.reserve(picked.size());
  for (std::string_view id : picked) {
    ex.retrieved.push_back(encode_card(store, layout.use_embeddings, user, cards, id, now));
  }
  return ex;
}

std::vector<EncodedExample> build_examples(const EmbeddingStore& store, const ModelLayout& layout,
                                           std::span<const StudyRecord> chronological) {
  std::unordered_map<std::string, UserState, StringHash, std::equal_to<>> users;
  CardAggregates aggregates;
  std::vector<EncodedExample> out;
  out.reserve(chronological.size());
  Timestamp last = chronological.empty() ? 0 : chronological.front().timestamp;
  for (const StudyRecord& r : chronological) {
    if (r.timestamp < last) {
      throw Error(ErrorCode::kOutOfOrderTimestamp, "log is not globally chronological at t=" +
                                                       std::to_string(r.timestamp));
    }
    last = r.timestamp;
    auto it = users.find(r.user_id);
    if (it == users.end()) it = users.emplace(r.user_id, UserState(r.user_id)).first;
    EncodedExample ex = encode(store, layout, it->second, aggregates, r.card_id, r.timestamp);
    ex.label = r.correct;
    out.push_back(std::move(ex));
    it->second.apply(r);
    aggregates.add(r.card_id, r.correct);
  }
  return out;
}

void assemble_example(const EmbeddingStore& store, const ModelLayout& layout, const NormalizationStats& stats,
                      const EncodedExample& example, std::span<double> out) {
  const InputLayout in = layout.input_layout(store.dim());
  const std::size_t f = in.feature_count;
  // Normalized features live in one scratch buffer so the blocks can be views.
  std::vector<double> scratch((1 + example.retrieved.size()) * f);
  normalize_into(example.card.features, stats, layout.features, std::span(scratch).first(f));
  std::vector<RetrievedBlock> blocks;
  blocks.reserve(example.retrieved.size());
  for (std::size_t i = 0; i < example.retrieved.size(); ++i) {
    const EncodedCard& rc = example.retrieved[i];
    const std::span<double> slot(scratch.data() + (i + 1) * f, f);
    normalize_into(rc.features, stats, layout.features, slot);
    blocks.push_back({layout.use_embeddings ? store.row(rc.store_index) : std::span<const float>{}, slot,
                      rc.last_correct});
  }
  const std::span<const float> card_embedding =
      layout.use_embeddings ? store.row(example.card.store_index) : std::span<const float>{};
  assemble_into(in, card_embedding, std::span<const double>(scratch.data(), f), blocks, out);
}

ContentModel::ContentModel(std::shared_ptr<const EmbeddingStore> store, ModelLayout layout,
                           NormalizationStats stats, NetworkParams params)
    : store_(std::move(store)), layout_(std::move(layout)), stats_(stats), params_(std::move(params)) {
  if (!store_) throw Error(ErrorCode::kInvalidArgument, "content model needs an embedding store");
  if (params_.input_width() != input_layout().width()) {
    throw Error(ErrorCode::kDimensionMismatch, "network input width " + std::to_string(params_.input_width()) +
                                                   " does not match layout width " +
                                                   std::to_string(input_layout().width()));
  }
}

double ContentModel::predict(const UserState& user, const CardAggregatesView& cards, std::string_view card_id,
                             Timestamp now) const {
  const EncodedExample ex = encode(*store_, layout_, user, cards, card_id, now);
  std::vector<double> row(params_.input_width());
  assemble_example(*store_, layout_, stats_, ex, row);
  return forward_one(params_, row, false, nullptr);
}

TrainResult train_content_model(std::shared_ptr<const EmbeddingStore> store, const ModelLayout& layout,
                                std::span<const EncodedExample> train, const TrainConfig& config,
                                const EpochCallback& on_epoch) {
  validate(config);
  if (train.empty()) throw Error(ErrorCode::kEmptySplit, "no training examples");
  std::vector<FeatureVector> current;
  current.reserve(train.size());
  for (const EncodedExample& ex : train) current.push_back(ex.card.features);
  const NormalizationStats stats = fit_normalization(current);

  const InputLayout in = layout.input_layout(store->dim());
  NetworkParams params = NetworkParams::initialize(in.width(), config.hidden_width, config.dropout, config.seed);
  const auto fill = [&](std::span<const std::size_t> rows, Eigen::MatrixXd& inputs, std::vector<double>& labels) {
    std::vector<double> row(in.width());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const EncodedExample& ex = train[rows[i]];
      assemble_example(*store, layout, stats, ex, row);
      inputs.row(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
      labels[i] = ex.label ? 1.0 : 0.0;
    }
  };
  TrainResult result;
  result.loss_per_epoch = train_network(params, train.size(), fill, config, on_epoch);
  round_to_float(params);
  result.example_count = train.size();
  result.model = std::make_unique<ContentModel>(std::move(store), layout, stats, std::move(params));
  return result;
}

void save_checkpoint(const ContentModel& model, const TrainConfig& config, std::ostream& out) {
  const NetworkParams& p = model.params();
  const ModelLayout& layout = model.layout();
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.input_width()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.hidden_width()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.store().dim()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(layout.retrieval));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layout.k));
  put<std::uint8_t>(out, layout.use_embeddings ? 1 : 0);
  std::uint32_t mask = 0;
  for (Feature f : layout.features.active()) mask |= 1u << index_of(f);
  put<std::uint32_t>(out, mask);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(kFeatureCount));
  for (double m : model.normalization().mean) put<double>(out, m);
  for (double s : model.normalization().stddev) put<double>(out, s);
  put<double>(out, config.learning_rate);
  put<std::uint64_t>(out, config.batch_size);
  put<std::int32_t>(out, config.epochs);
  put<double>(out, config.beta1);
  put<double>(out, config.beta2);
  put<double>(out, config.epsilon);
  put<double>(out, config.dropout);
  put<std::uint64_t>(out, config.hidden_width);
  put<std::uint64_t>(out, config.seed);
  put<double>(out, p.dropout);
  const std::vector<double> flat = p.flatten();
  put<std::uint64_t>(out, flat.size());
  for (double v : flat) put<float>(out, static_cast<float>(v));
  if (!out) throw Error(ErrorCode::kIoError, "failed to write checkpoint");
}

void save_checkpoint(const ContentModel& model, const TrainConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  save_checkpoint(model, config, out);
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "failed to write " + path.string());
}

LoadedCheckpoint load_checkpoint(std::istream& in, std::shared_ptr<const EmbeddingStore> store) {
  if (!store) throw Error(ErrorCode::kInvalidArgument, "checkpoint load needs an embedding store");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw Error(ErrorCode::kCorruptCheckpoint, "bad checkpoint magic");
  }
  if (get<std::uint32_t>(in) != kCheckpointVersion) {
    throw Error(ErrorCode::kCorruptCheckpoint, "unsupported checkpoint version");
  }
  const auto input_width = get<std::uint32_t>(in);
  const auto hidden = get<std::uint32_t>(in);
  const auto dim = get<std::uint32_t>(in);
  if (dim != store->dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "checkpoint expects " + std::to_string(dim) +
                                                   "-dim embeddings, store has " + std::to_string(store->dim()));
  }
  ModelLayout layout;
  const auto mode = get<std::uint8_t>(in);
  if (mode > static_cast<std::uint8_t>(RetrievalMode::kNone)) {
    throw Error(ErrorCode::kCorruptCheckpoint, "bad retrieval mode");
  }
  layout.retrieval = static_cast<RetrievalMode>(mode);
  layout.k = get<std::uint32_t>(in);
  layout.use_embeddings = get<std::uint8_t>(in) != 0;
  const auto mask = get<std::uint32_t>(in);
  if (get<std::uint32_t>(in) != kFeatureCount) throw Error(ErrorCode::kCorruptCheckpoint, "feature count mismatch");
  layout.features = FeatureMask::none();
  for (Feature f : all_features()) {
    if (mask & (1u << index_of(f))) layout.features.set(f);
  }
  NormalizationStats stats;
  for (double& m : stats.mean) m = get<double>(in);
  for (double& s : stats.stddev) s = get<double>(in);
  LoadedCheckpoint loaded;
  TrainConfig& c = loaded.config;
  c.learning_rate = get<double>(in);
  c.batch_size = get<std::uint64_t>(in);
  c.epochs = get<std::int32_t>(in);
  c.beta1 = get<double>(in);
  c.beta2 = get<double>(in);
  c.epsilon = get<double>(in);
  c.dropout = get<double>(in);
  c.hidden_width = get<std::uint64_t>(in);
  c.seed = get<std::uint64_t>(in);
  const double dropout = get<double>(in);

  if (layout.input_layout(dim).width() != input_width || hidden == 0) {
    throw Error(ErrorCode::kCorruptCheckpoint, "checkpoint dimensions are inconsistent");
  }
  NetworkParams params = NetworkParams::zeros(input_width, hidden);
  params.dropout = dropout;
  if (get<std::uint64_t>(in) != params.parameter_count()) {
    throw Error(ErrorCode::kCorruptCheckpoint, "parameter count mismatch");
  }
  std::vector<double> flat(params.parameter_count());
  for (double& v : flat) v = get<float>(in);
  params.unflatten(flat);
  loaded.model = std::make_unique<ContentModel>(std::move(store), layout, stats, std::move(params));
  return loaded;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const EmbeddingStore> store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open checkpoint " + path.string());
  return load_checkpoint(in, std::move(store));
}

}  // namespace mnemo
