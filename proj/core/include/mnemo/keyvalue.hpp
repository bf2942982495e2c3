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

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

namespace mnemo {

// Plain-text "key=value" files: one pair per line, '#' comments and blank
// lines ignored, whitespace around keys and values trimmed.
using KeyValues = std::map<std::string, std::string, std::less<>>;

KeyValues read_key_values(std::istream& in);
void write_key_values(const KeyValues& values, std::ostream& out);

// Shortest text that parses back to the identical double.
std::string format_double(double v);
// Throws kTypeMismatch naming `what` on malformed input.
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

const std::string& require_key(const KeyValues& values, std::string_view key);

}  // namespace mnemo
