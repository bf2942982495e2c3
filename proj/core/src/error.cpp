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

#include "mnemo/error.hpp"

namespace mnemo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kOutOfOrderTimestamp: return "out_of_order_timestamp";
    case ErrorCode::kUserMismatch: return "user_mismatch";
    case ErrorCode::kEmptySplit: return "empty_split";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kDuplicateCardId: return "duplicate_card_id";
    case ErrorCode::kMalformedRow: return "malformed_row";
    case ErrorCode::kMissingEmbedding: return "missing_embedding";
    case ErrorCode::kNonfiniteActivation: return "nonfinite_activation";
    case ErrorCode::kDegenerateLabels: return "degenerate_labels";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kEmptyCandidates: return "empty_candidates";
    case ErrorCode::kMissingColumn: return "missing_column";
    case ErrorCode::kTypeMismatch: return "type_mismatch";
    case ErrorCode::kInvalidResponse: return "invalid_response";
    case ErrorCode::kEmptyDataset: return "empty_dataset";
    case ErrorCode::kUnknownCard: return "unknown_card";
    case ErrorCode::kUnknownUser: return "unknown_user";
    case ErrorCode::kPhaseViolation: return "phase_violation";
    case ErrorCode::kCorruptCheckpoint: return "corrupt_checkpoint";
    case ErrorCode::kIoError: return "io_error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace mnemo
