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

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mnemo/domain.hpp"
#include "mnemo/features.hpp"

namespace mnemo {

/// One row of the released study log. Optional columns stay empty when the
/// source lacks them.
struct DatasetRow {
  std::size_t line = 0;  // 1-based line (JSONL) or record number (CSV) in the source
  std::string user_id;
  std::string card_id;
  std::string card_text;
  std::string deck_id;
  std::string deck_name;
  bool response = false;
  Timestamp timestamp = 0;    // parsed utc_datetime
  std::string utc_datetime;   // as written in the source
  std::string utc_date;
  std::optional<std::int64_t> elapsed_milliseconds;
  std::optional<double> n_minutes_spent;
  std::optional<bool> correct_on_first_try;
  std::array<std::optional<double>, kDatasetFeatureCount> features;  // stored feature columns, dataset order
  std::string answer_text;  // free-text answer kept for audit
};

// Column-wise equality; the source line is ignored.
bool operator==(const DatasetRow& a, const DatasetRow& b);

// Accepts "YYYY-MM-DD[T| ]HH:MM:SS[.fff][Z|+00:00]", a bare date, or integral
// epoch seconds. Throws kTypeMismatch.
Timestamp parse_utc_datetime(std::string_view text);
std::string format_utc_datetime(Timestamp t);  // "YYYY-MM-DDTHH:MM:SSZ"

// Errors carry the offending line: kMissingColumn, kTypeMismatch,
// kInvalidResponse, kMalformedRow. Blank lines are skipped.
std::vector<DatasetRow> parse_jsonl(std::istream& in);
// Header row required; RFC 4180 quoting, quoted fields may span lines.
std::vector<DatasetRow> parse_csv(std::istream& in);
// Dispatches on extension: ".csv" is CSV, anything else JSON Lines.
std::vector<DatasetRow> load_dataset(const std::filesystem::path& path);

std::string row_to_json(const DatasetRow& row);
void write_jsonl(std::span<const DatasetRow> rows, std::ostream& out);
// Parses one JSON object; `line` is used in error messages.
DatasetRow row_from_json(std::string_view json, std::size_t line);

StudyRecord to_record(const DatasetRow& row);

// Row indices in chronological order; ties keep file order.
std::vector<std::size_t> chronological_order(std::span<const DatasetRow> rows);
std::vector<StudyRecord> chronological_records(std::span<const DatasetRow> rows);

struct Histories {
  std::map<std::string, StudyHistory, std::less<>> users;
  CardAggregates cards;
  std::size_t record_count = 0;
};

Histories build_histories(std::span<const DatasetRow> rows);

// Distinct cards in first-appearance order, front text from card_text
// (or the card id when empty).
std::vector<Flashcard> corpus_from_rows(std::span<const DatasetRow> rows);
// One JSON object per line with card_id, front_text, back_text, deck_id,
// deck_name.
std::vector<Flashcard> read_cards_jsonl(std::istream& in);
void write_cards_jsonl(std::span<const Flashcard> cards, std::ostream& out);

/// Chronological train/eval partition of a dataset. Record ids are row
/// indices in file order.
struct SplitManifest {
  double ratio = 0.75;
  std::string fingerprint;  // hex SHA-256 of the canonical row serialization
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;

  bool degenerate() const { return train.empty() || eval.empty(); }
  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

std::string sha256_hex(std::string_view bytes);
std::string dataset_fingerprint(std::span<const DatasetRow> rows);

// First ceil(ratio * N) records in time order go to train. Throws
// kEmptyDataset, kInvalidArgument.
SplitManifest chronological_split(std::span<const DatasetRow> rows, double ratio = 0.75);

void write_manifest(const SplitManifest& manifest, std::ostream& out);
// Throws kMalformedRow on syntax errors and kInvalidArgument when the id
// sets overlap.
SplitManifest read_manifest(std::istream& in);

/// Agreement of recomputed features with the stored columns.
struct FeatureAgreement {
  std::size_t rows = 0;          // rows with at least one stored feature
  std::size_t matching_rows = 0;  // rows where every stored feature agrees
  std::array<std::size_t, kDatasetFeatureCount> compared{};
  std::array<std::size_t, kDatasetFeatureCount> mismatched{};

  double row_match_rate() const { return rows == 0 ? 1.0 : static_cast<double>(matching_rows) / rows; }
};

// Replays rows chronologically and compares each stored column with the
// recomputed value. usercard_delta_previous may be stored in hours or
// seconds; sm2_efactor of an unseen card may be stored as 0 or 2.5.
FeatureAgreement compare_stored_features(std::span<const DatasetRow> rows, double tolerance = 1e-6);

// Replays rows chronologically and writes the recomputed feature values
// into each row's stored columns.
void fill_stored_features(std::span<DatasetRow> rows);

}  // namespace mnemo
