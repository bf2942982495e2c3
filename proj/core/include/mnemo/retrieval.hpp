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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mnemo/domain.hpp"
#include "mnemo/features.hpp"

namespace mnemo {

inline constexpr std::size_t kDefaultEmbeddingDim = 768;
inline constexpr std::size_t kDefaultRetrievalK = 5;

/// Card embeddings in one contiguous row-major block. Immutable once loaded,
/// so concurrent lookups need no locking.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim = kDefaultEmbeddingDim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }

  // Errors: kDimensionMismatch, kDuplicateCardId, kMalformedRow (non-finite).
  void add(std::string card_id, std::span<const float> vector);

  bool contains(std::string_view card_id) const { return index_.find(card_id) != index_.end(); }
  std::optional<std::size_t> index_of(std::string_view card_id) const;
  // Throws kMissingEmbedding for unknown ids.
  std::size_t require(std::string_view card_id) const;
  std::span<const float> row(std::size_t index) const { return {data_.data() + index * dim_, dim_}; }
  std::span<const float> vector(std::string_view card_id) const { return row(require(card_id)); }
  const std::string& card_id(std::size_t index) const { return ids_[index]; }

 private:
  std::size_t dim_;
  std::vector<float> data_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> index_;
};

// Text format: "#dim D" header, then "card_id<TAB>v1 v2 ... vD" per line.
// Binary format: "EMB1", u32 D, then per record u32 id length, id bytes and
// D float32 values, all little-endian. load_embeddings sniffs the magic.
EmbeddingStore read_embeddings_text(std::istream& in);
EmbeddingStore read_embeddings_binary(std::istream& in);
EmbeddingStore load_embeddings(const std::filesystem::path& path);
void write_embeddings_text(const EmbeddingStore& store, std::ostream& out);
void write_embeddings_binary(const EmbeddingStore& store, std::ostream& out);

// Raw dot product accumulated in double. Throws kDimensionMismatch.
double score(std::span<const float> query, std::span<const float> doc);

struct RetrievedEntry {
  std::string card_id;
  std::size_t store_index = 0;
  double score = 0.0;
  // Filled by the caller that owns the study state; retrieval leaves them zero.
  FeatureVector features;
  bool last_correct = false;
};

// Descending score; equal scores ordered by card_id.
using RetrievedSet = std::vector<RetrievedEntry>;

struct ScoredIndex {
  std::size_t store_index = 0;
  double score = 0.0;
};

// Exact top-k over candidate store rows. Candidates must be distinct.
std::vector<ScoredIndex> topk_indices(const EmbeddingStore& store, std::span<const std::size_t> candidates,
                                      std::span<const float> query, std::size_t k);

// Top-k over distinct cards in `candidate_ids` (duplicates collapse).
// Throws kMissingEmbedding if the query or any candidate lacks a vector.
RetrievedSet retrieve_topk(const EmbeddingStore& store, std::span<const std::string> candidate_ids,
                           std::string_view query_card_id, std::size_t k);
RetrievedSet retrieve_topk(const EmbeddingStore& store, const StudyHistory& history, const Flashcard& query_card,
                           std::size_t k = kDefaultRetrievalK);

// The k most recently studied distinct cards, newest first, score 0.
RetrievedSet past_k(const StudyHistory& history, std::size_t k);

}  // namespace mnemo
