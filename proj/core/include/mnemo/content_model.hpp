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

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mnemo/features.hpp"
#include "mnemo/network.hpp"
#include "mnemo/retrieval.hpp"
#include "mnemo/student_model.hpp"

namespace mnemo {

enum class RetrievalMode : std::uint8_t { kTopK, kPastK, kNone };

std::string_view to_string(RetrievalMode mode);
RetrievalMode parse_retrieval_mode(std::string_view text);  // "topk", "pastk", "none"

struct ModelLayout {
  RetrievalMode retrieval = RetrievalMode::kTopK;
  std::size_t k = kDefaultRetrievalK;
  bool use_embeddings = true;
  FeatureMask features = FeatureMask::all();

  std::size_t effective_k() const { return retrieval == RetrievalMode::kNone ? 0 : k; }
  InputLayout input_layout(std::size_t embedding_dim) const;

  friend bool operator==(const ModelLayout&, const ModelLayout&) = default;
};

// One card's slot in an encoded example.
struct EncodedCard {
  std::size_t store_index = 0;
  FeatureVector features;  // raw, before normalization
  bool last_correct = false;
};

// Everything needed to rebuild one network input once normalization is known.
struct EncodedExample {
  EncodedCard card;
  std::vector<EncodedCard> retrieved;  // descending retrieval score
  bool label = false;
  bool seen = false;
};

// Retrieval plus raw feature extraction for `card_id` at `now`. Retrieval
// draws from the cards in `user`, excluding the query card itself.
// Throws kMissingEmbedding.
EncodedExample encode(const EmbeddingStore& store, const ModelLayout& layout, const UserState& user,
                      const CardAggregatesView& cards, std::string_view card_id, Timestamp now);

// Replays a globally chronological log, encoding each record against the
// state that precedes it. Throws kOutOfOrderTimestamp, kMissingEmbedding.
std::vector<EncodedExample> build_examples(const EmbeddingStore& store, const ModelLayout& layout,
                                           std::span<const StudyRecord> chronological);

void assemble_example(const EmbeddingStore& store, const ModelLayout& layout, const NormalizationStats& stats,
                      const EncodedExample& example, std::span<double> out);

/// The content-aware recall classifier: retrieval over the user's studied
/// cards, feature extraction and normalization, then the network.
class ContentModel final : public StudentModel {
 public:
  ContentModel(std::shared_ptr<const EmbeddingStore> store, ModelLayout layout, NormalizationStats stats,
               NetworkParams params);

  std::string tag() const override { return "mnemo"; }
  double predict(const UserState& user, const CardAggregatesView& cards, std::string_view card_id,
                 Timestamp now) const override;

  const EmbeddingStore& store() const { return *store_; }
  const std::shared_ptr<const EmbeddingStore>& shared_store() const { return store_; }
  const ModelLayout& layout() const { return layout_; }
  const NormalizationStats& normalization() const { return stats_; }
  const NetworkParams& params() const { return params_; }
  InputLayout input_layout() const { return layout_.input_layout(store_->dim()); }

 private:
  std::shared_ptr<const EmbeddingStore> store_;
  ModelLayout layout_;
  NormalizationStats stats_;
  NetworkParams params_;
};

struct TrainResult {
  std::unique_ptr<ContentModel> model;
  std::vector<double> loss_per_epoch;
  std::size_t example_count = 0;
};

// Fits normalization on the training examples, then trains the network.
// Parameters are rounded to float32 on return so the in-memory model equals
// its checkpoint. Throws kEmptySplit, kMissingEmbedding.
TrainResult train_content_model(std::shared_ptr<const EmbeddingStore> store, const ModelLayout& layout,
                                std::span<const EncodedExample> train, const TrainConfig& config,
                                const EpochCallback& on_epoch = {});

// Checkpoint container: "MNC1", dimensions, layout, normalization (f64),
// train-config echo, then float32 parameter blobs, all little-endian.
// The store is not embedded; load checks its dimension. Throws
// kCorruptCheckpoint, kDimensionMismatch, kIoError.
void save_checkpoint(const ContentModel& model, const TrainConfig& config, std::ostream& out);
void save_checkpoint(const ContentModel& model, const TrainConfig& config, const std::filesystem::path& path);

struct LoadedCheckpoint {
  std::unique_ptr<ContentModel> model;
  TrainConfig config;
};

LoadedCheckpoint load_checkpoint(std::istream& in, std::shared_ptr<const EmbeddingStore> store);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const EmbeddingStore> store);

}  // namespace mnemo
