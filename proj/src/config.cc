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

#include "tiermem/config.h"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tiermem/types.h"

namespace tiermem {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

Config Config::Parse(std::string_view text, std::string origin) {
  Config c;
  c.origin_ = std::move(origin);
  std::string section;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;
    const std::string where = c.origin_ + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError(where + ": malformed section header");
      }
      section = std::string(Trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected key = value");
    }
    const std::string_view key = Trim(line.substr(0, eq));
    std::string_view value = Trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw ConfigError(where + ": empty key");
    const std::string full =
        section.empty() ? std::string(key) : section + "." + std::string(key);
    if (c.values_.contains(full)) {
      throw ConfigError(where + ": duplicate key '" + full + "'");
    }
    c.values_[full] = std::string(value);
    c.lines_[full] = line_no;
  }
  return c;
}

Config Config::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Config c = Parse(ss.str(), path.string());
  c.base_dir_ = path.parent_path();
  return c;
}

bool Config::Has(std::string_view key) const { return values_.contains(key); }

void Config::Set(std::string key, std::string value) {
  lines_.erase(key);
  values_[std::move(key)] = std::move(value);
}

std::optional<std::string> Config::Find(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::Where(std::string_view key) const {
  auto it = lines_.find(key);
  if (it == lines_.end()) return origin_ + ": '" + std::string(key) + "'";
  return origin_ + ":" + std::to_string(it->second) + ": '" +
         std::string(key) + "'";
}

void Config::Fail(std::string_view key, std::string_view message) const {
  throw ConfigError(Where(key) + ": " + std::string(message));
}

std::string Config::GetString(std::string_view key,
                              std::string fallback) const {
  auto v = Find(key);
  return v ? *v : fallback;
}

uint64_t Config::GetUint(std::string_view key, uint64_t fallback) const {
  auto v = Find(key);
  if (!v) return fallback;
  uint64_t out = 0;
  const char* end = v->data() + v->size();
  auto [ptr, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || ptr != end) Fail(key, "expected an unsigned integer");
  return out;
}

double Config::GetDouble(std::string_view key, double fallback) const {
  auto v = Find(key);
  if (!v) return fallback;
  try {
    size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw 0;
    return d;
  } catch (...) {
    Fail(key, "expected a number");
  }
}

bool Config::GetBool(std::string_view key, bool fallback) const {
  auto v = Find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  Fail(key, "expected true or false");
}

void Config::CheckKnown(const std::set<std::string, std::less<>>& known) const {
  for (const auto& [key, value] : values_) {
    if (known.contains(key)) continue;
    bool matched = false;
    for (const std::string& k : known) {
      if (!k.empty() && k.back() == '.' && key.rfind(k, 0) == 0) {
        matched = true;
        break;
      }
    }
    if (!matched) Fail(key, "unknown key");
  }
}

std::string Config::Canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

uint64_t Fnv1a64(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tiermem
