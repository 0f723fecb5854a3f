// Copyright 2026 The tiermem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TIERMEM_CONFIG_H_
#define TIERMEM_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace tiermem {

// Flat `key = value` text with `[section]` headers; keys are stored as
// `section.key`. `#` starts a comment. Every value remembers its line so
// validation errors can point at it.
class Config {
 public:
  static Config Parse(std::string_view text, std::string origin = "<string>");
  static Config Load(const std::filesystem::path& path);

  bool Has(std::string_view key) const;
  void Set(std::string key, std::string value);

  std::string GetString(std::string_view key, std::string fallback) const;
  uint64_t GetUint(std::string_view key, uint64_t fallback) const;
  double GetDouble(std::string_view key, double fallback) const;
  bool GetBool(std::string_view key, bool fallback) const;
  std::optional<std::string> Find(std::string_view key) const;

  // ConfigError naming `key` and its line.
  [[noreturn]] void Fail(std::string_view key, std::string_view message) const;

  // Throws for the first key not in `known` (exact match or prefix ending in
  // '.', e.g. "schedule.pressure.").
  void CheckKnown(const std::set<std::string, std::less<>>& known) const;

  const std::string& origin() const { return origin_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }
  const std::map<std::string, std::string, std::less<>>& values() const {
    return values_;
  }
  // "key=value\n" lines in key order.
  std::string Canonical() const;

 private:
  std::string Where(std::string_view key) const;

  std::string origin_;
  std::filesystem::path base_dir_;
  std::map<std::string, std::string, std::less<>> values_;
  std::map<std::string, int, std::less<>> lines_;
};

uint64_t Fnv1a64(std::string_view data);

}  // namespace tiermem

#endif  // TIERMEM_CONFIG_H_
