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
#include <random>
#include <string>
#include <vector>

#include "mnemo/domain.hpp"

namespace mnemo::testing {

// A fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mnemo-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// `n` cards split round-robin over `decks` decks named deck0, deck1, ...
inline std::vector<Flashcard> make_corpus(std::size_t n, std::size_t decks = 2) {
  std::vector<Flashcard> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string d = "deck" + std::to_string(i % decks);
    char id[16];
    std::snprintf(id, sizeof(id), "k%03zu", i);
    out.push_back({id, "front " + std::to_string(i), "back " + std::to_string(i), d, "Deck " + d});
  }
  return out;
}

}  // namespace mnemo::testing
