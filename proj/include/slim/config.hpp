// Copyright 2026 The slim Authors. All Rights Reserved.
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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace slim {

/// Structured key-value text:
///
///     # comment
///     top_level = value
///     [section]
///     key = value
///     key = repeated keys keep their order
///
/// Keys outside any section belong to section "".
class KeyValueFile {
 public:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
  };

  static KeyValueFile parse(std::string_view text);
  static KeyValueFile load(const std::filesystem::path& path);

  std::optional<std::string> get(std::string_view section, std::string_view key) const;
  std::vector<std::string> get_all(std::string_view section, std::string_view key) const;
  bool has(std::string_view section, std::string_view key) const { return get(section, key).has_value(); }

  /// Replaces every existing value of (section, key) with one entry.
  void set(std::string_view section, std::string_view key, std::string value);

  std::string get_string(std::string_view section, std::string_view key, std::string fallback) const;
  double get_double(std::string_view section, std::string_view key, double fallback) const;
  long long get_int(std::string_view section, std::string_view key, long long fallback) const;
  bool get_bool(std::string_view section, std::string_view key, bool fallback) const;

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

/// "a=1 b=2" style attribute lists used inside single values.
std::vector<std::pair<std::string, std::string>> parse_attributes(std::string_view text);

double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);
std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

}  // namespace slim
