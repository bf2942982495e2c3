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

#include "mnemo/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "mnemo/error.hpp"

namespace mnemo {
namespace {

constexpr char kBinaryMagic[4] = {'E', 'M', 'B', '1'};

static_assert(std::endian::native == std::endian::little, "binary embedding I/O assumes a little-endian host");

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::kMalformedRow, "truncated binary embeddings");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

bool better(const EmbeddingStore& store, const ScoredIndex& a, const ScoredIndex& b) {
  if (a.score != b.score) return a.score > b.score;
  return store.card_id(a.store_index) < store.card_id(b.store_index);
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::kDimensionMismatch, "embedding dimension must be positive");
}

void EmbeddingStore::add(std::string card_id, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding for '" + card_id + "' has " +
                                                   std::to_string(vector.size()) + " values, expected " +
                                                   std::to_string(dim_));
  }
  if (card_id.empty()) throw Error(ErrorCode::kMalformedRow, "embedding row with empty card id");
  if (index_.find(card_id) != index_.end()) throw Error(ErrorCode::kDuplicateCardId, card_id);
  for (float x : vector) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kMalformedRow, "non-finite embedding value for '" + card_id + "'");
  }
  index_.emplace(card_id, ids_.size());
  ids_.push_back(std::move(card_id));
  data_.insert(data_.end(), vector.begin(), vector.end());
}

std::optional<std::size_t> EmbeddingStore::index_of(std::string_view card_id) const {
  auto it = index_.find(card_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingStore::require(std::string_view card_id) const {
  auto it = index_.find(card_id);
  if (it == index_.end()) throw Error(ErrorCode::kMissingEmbedding, "no embedding for card '" + std::string(card_id) + "'");
  return it->second;
}

EmbeddingStore read_embeddings_text(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<EmbeddingStore> store;
  std::vector<float> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!store) {
      std::size_t dim = 0;
      const std::string_view prefix = "#dim ";
      if (line.rfind(prefix, 0) != 0) throw Error(ErrorCode::kMalformedRow, "line 1: expected '#dim D' header");
      const char* first = line.data() + prefix.size();
      const char* last = line.data() + line.size();
      auto [ptr, ec] = std::from_chars(first, last, dim);
      if (ec != std::errc() || ptr != last || dim == 0) throw Error(ErrorCode::kMalformedRow, "line 1: bad dimension");
      store.emplace(dim);
      continue;
    }
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrorCode::kMalformedRow, "line " + std::to_string(line_no) + ": expected card_id<TAB>values");
    }
    values.clear();
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (ptr < end && *ptr != ' ')) {
        throw Error(ErrorCode::kMalformedRow, "line " + std::to_string(line_no) + ": bad float");
      }
      values.push_back(v);
      p = ptr;
    }
    if (values.size() != store->dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "line " + std::to_string(line_no) + ": " +
                                                     std::to_string(values.size()) + " values, expected " +
                                                     std::to_string(store->dim()));
    }
    store->add(line.substr(0, tab), values);
  }
  if (!store) throw Error(ErrorCode::kMalformedRow, "empty embedding file (missing '#dim D' header)");
  return std::move(*store);
}

EmbeddingStore read_embeddings_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kBinaryMagic, 4) != 0) {
    throw Error(ErrorCode::kMalformedRow, "missing EMB1 magic");
  }
  const std::uint32_t dim = read_u32(in);
  EmbeddingStore store(dim);
  std::vector<float> values(dim);
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t len = read_u32(in);
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw Error(ErrorCode::kMalformedRow, "truncated card id");
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(dim * sizeof(float)))) {
      throw Error(ErrorCode::kMalformedRow, "truncated vector for '" + id + "'");
    }
    store.add(std::move(id), values);
  }
  return store;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::memcmp(magic, kBinaryMagic, 4) == 0;
  in.clear();
  in.seekg(0);
  return binary ? read_embeddings_binary(in) : read_embeddings_text(in);
}

void write_embeddings_text(const EmbeddingStore& store, std::ostream& out) {
  out << "#dim " << store.dim() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < store.size(); ++i) {
    out << store.card_id(i) << '\t';
    const auto row = store.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), row[j]);
      if (j) out << ' ';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

void write_embeddings_binary(const EmbeddingStore& store, std::ostream& out) {
  out.write(kBinaryMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(store.dim()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& id = store.card_id(i);
    write_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    const auto row = store.row(i);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

double score(std::span<const float> query, std::span<const float> doc) {
  if (query.size() != doc.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "dot product of " + std::to_string(query.size()) + " and " +
                                                   std::to_string(doc.size()) + " dimensional vectors");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < query.size(); ++i) acc += static_cast<double>(query[i]) * doc[i];
  return acc;
}

std::vector<ScoredIndex> topk_indices(const EmbeddingStore& store, std::span<const std::size_t> candidates,
                                      std::span<const float> query, std::size_t k) {
  std::vector<ScoredIndex> scored;
  if (k == 0) return scored;
  scored.reserve(candidates.size());
  for (std::size_t idx : candidates) scored.push_back({idx, score(query, store.row(idx))});
  const std::size_t keep = std::min(k, scored.size());
  auto cmp = [&](const ScoredIndex& a, const ScoredIndex& b) { return better(store, a, b); };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), cmp);
  scored.resize(keep);
  return scored;
}

RetrievedSet retrieve_topk(const EmbeddingStore& store, std::span<const std::string> candidate_ids,
                           std::string_view query_card_id, std::size_t k) {
  const auto query = store.vector(query_card_id);
  std::vector<std::size_t> candidates;
  std::unordered_set<std::size_t> present;
  for (const auto& id : candidate_ids) {
    const std::size_t idx = store.require(id);
    if (present.insert(idx).second) candidates.push_back(idx);
  }
  RetrievedSet out;
  for (const ScoredIndex& s : topk_indices(store, candidates, query, k)) {
    RetrievedEntry e;
    e.card_id = store.card_id(s.store_index);
    e.store_index = s.store_index;
    e.score = s.score;
    out.push_back(std::move(e));
  }
  return out;
}

RetrievedSet retrieve_topk(const EmbeddingStore& store, const StudyHistory& history, const Flashcard& query_card,
                           std::size_t k) {
  std::vector<std::string> ids;
  ids.reserve(history.size());
  for (const auto& e : history.entries()) ids.push_back(e.record.card_id);
  return retrieve_topk(store, ids, query_card.card_id, k);
}

RetrievedSet past_k(const StudyHistory& history, std::size_t k) {
  RetrievedSet out;
  std::unordered_set<std::string_view> taken;
  const auto entries = history.entries();
  for (auto it = entries.rbegin(); it != entries.rend() && out.size() < k; ++it) {
    if (!taken.insert(it->record.card_id).second) continue;
    RetrievedEntry e;
    e.card_id = it->record.card_id;
    e.last_correct = it->record.correct;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace mnemo
