// Copyright 2026 The qaforge Authors.
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

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qaforge/error.hpp"
#include "qaforge/sampling.hpp"
#include "qaforge/textproc.hpp"

namespace qaforge {

/// Flat `key = value` settings. Later layers override earlier ones:
/// defaults, file, environment, command line.
class KvConfig {
 public:
  static KvConfig parse(std::string_view text, std::string_view source = "config") {
    KvConfig c;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = utf8::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string where = std::string(source) + " line " + std::to_string(line_no);
      if (eq == std::string_view::npos) throw ValidationError(where + ": expected key = value");
      const std::string key(utf8::trim(line.substr(0, eq)));
      if (key.empty()) throw ValidationError(where + ": empty key");
      if (c.values_.count(key)) throw ValidationError(where + ": duplicate key '" + key + "'");
      c.values_[key] = std::string(utf8::trim(line.substr(eq + 1)));
    }
    return c;
  }

  static KvConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text, path);
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  /// Sets `key=value` from a single argument.
  void set_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ValidationError("expected key=value, got '" + std::string(assignment) + "'");
    set(std::string(utf8::trim(assignment.substr(0, eq))),
        std::string(utf8::trim(assignment.substr(eq + 1))));
  }

  /// For each known key, PREFIX + upper-cased key overrides the value.
  void apply_env(const std::set<std::string>& keys, std::string_view prefix = "QAFORGE_") {
    for (const auto& key : keys) {
      std::string name(prefix);
      for (char ch : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
      if (const char* v = std::getenv(name.c_str())) values_[key] = v;
    }
  }

  void require_known(const std::set<std::string>& keys) const {
    for (const auto& [k, _] : values_)
      if (!keys.count(k)) throw ValidationError("unknown config key '" + k + "'");
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_string(const std::string& key, std::string fallback) const {
    return get(key).value_or(std::move(fallback));
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing");
      return d;
    } catch (const std::exception&) {
      throw ValidationError("config key '" + key + "': '" + *v + "' is not a number");
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const long long n = std::stoll(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing");
      return n;
    } catch (const std::exception&) {
      throw ValidationError("config key '" + key + "': '" + *v + "' is not an integer");
    }
  }

  std::optional<std::int64_t> get_optional_int(const std::string& key) const {
    if (!has(key) || get(key)->empty()) return std::nullopt;
    return get_int(key, 0);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    const std::string s = utf8::to_lower(*v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ValidationError("config key '" + key + "': '" + *v + "' is not a boolean");
  }

  /// Comma-separated list; empty items dropped.
  std::vector<std::string> get_list(const std::string& key,
                                    std::vector<std::string> fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    std::string_view rest = *v;
    while (true) {
      const auto comma = rest.find(',');
      const auto item = utf8::trim(rest.substr(0, comma));
      if (!item.empty()) out.emplace_back(item);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  /// Canonical `key=value` lines in key order.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

  std::uint64_t hash() const { return fnv1a64(canonical()); }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace qaforge
