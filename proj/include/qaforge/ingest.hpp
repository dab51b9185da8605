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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "qaforge/corpus_model.hpp"
#include "qaforge/error.hpp"
#include "qaforge/sampling.hpp"
#include "qaforge/textproc.hpp"

namespace qaforge {

/// Case-insensitive category substrings that mark disambiguation pages.
inline std::vector<std::string> default_disambiguation_patterns() {
  return {"страницы значений", "многозначные термины", "неоднозначност",
          "disambiguation"};
}

struct IngestConfig {
  int batch_count = 20;
  std::optional<std::size_t> min_chars;
  std::optional<std::size_t> max_chars;
  std::vector<std::string> exclude_category_patterns = default_disambiguation_patterns();
  DomainTag domain = DomainTag::kWiki;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_count < 1) throw ValidationError("batch_count must be >= 1");
    if (min_chars && max_chars && !(*min_chars < *max_chars))
      throw ValidationError("min_chars must be below max_chars");
  }

  /// Length limits used for the non-Wikipedia genres: news up to 3500
  /// characters, social media and fiction up to 3000, reviews over 500 and
  /// up to 1007. Wikipedia summaries are not length-limited.
  static IngestConfig for_domain(DomainTag domain) {
    IngestConfig c;
    c.domain = domain;
    switch (domain) {
      case DomainTag::kNews: c.max_chars = 3500; break;
      case DomainTag::kSocial: c.max_chars = 3000; break;
      case DomainTag::kFiction: c.max_chars = 3000; break;
      case DomainTag::kReviews:
        c.min_chars = 501;
        c.max_chars = 1007;
        break;
      case DomainTag::kWiki:
      case DomainTag::kOther: break;
    }
    return c;
  }
};

struct RawRecord {
  std::optional<std::string> id;
  std::string title;
  std::string text;
  std::vector<std::string> categories;
};

struct IngestReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t malformed = 0;
  std::size_t empty_text = 0;
  std::size_t disambiguation = 0;
  std::size_t too_short = 0;
  std::size_t too_long = 0;
  std::size_t duplicate_text = 0;
  std::vector<std::size_t> batch_sizes;

  json to_json() const {
    return json{{"input", input},
                {"kept", kept},
                {"dropped",
                 {{"malformed", malformed},
                  {"empty_text", empty_text},
                  {"disambiguation", disambiguation},
                  {"too_short", too_short},
                  {"too_long", too_long},
                  {"duplicate_text", duplicate_text}}},
                {"batch_sizes", batch_sizes}};
  }
};

/// Passage id derived from domain and text hash, so it does not depend on
/// input order.
inline std::string derive_passage_id(DomainTag domain, std::string_view text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(text)));
  return std::string(to_string(domain)) + "-" + buf;
}

/// Balanced, seeded batch assignment: passages are ranked by a seeded hash of
/// their id (ties by id) and dealt round-robin, so batch sizes differ by at
/// most one and the result does not depend on input order.
inline void assign_batches(std::vector<Passage>& passages, int batch_count,
                           std::uint64_t seed = 0) {
  if (batch_count < 1) throw ValidationError("batch_count must be >= 1");
  std::vector<std::pair<std::uint64_t, std::size_t>> order;
  order.reserve(passages.size());
  const std::uint64_t salt = mix64(seed);
  for (std::size_t i = 0; i < passages.size(); ++i)
    order.emplace_back(mix64(fnv1a64(passages[i].id) ^ salt), i);
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return passages[a.second].id < passages[b.second].id;
  });
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    passages[order[rank].second].batch = static_cast<int>(rank % static_cast<std::size_t>(batch_count));
}

/// Single-pass passage store builder. Feed records with add(), then call
/// finish() to assign batches.
class Ingester {
 public:
  explicit Ingester(IngestConfig config) : config_(std::move(config)) {
    config_.validate();
    for (const auto& p : config_.exclude_category_patterns)
      patterns_.push_back(utf8::to_lower(p));
  }

  void add(const RawRecord& record) {
    ++report_.input;
    const std::string text(utf8::trim(record.text));
    if (text.empty()) {
      ++report_.empty_text;
      return;
    }
    if (is_disambiguation(record.categories)) {
      ++report_.disambiguation;
      return;
    }
    const std::size_t chars = utf8::length(text);
    if (config_.min_chars && chars < *config_.min_chars) {
      ++report_.too_short;
      return;
    }
    if (config_.max_chars && chars > *config_.max_chars) {
      ++report_.too_long;
      return;
    }
    const std::uint64_t h = fnv1a64(text);
    auto& bucket = seen_[h];
    for (std::size_t idx : bucket) {
      if (passages_[idx].text == text) {
        ++report_.duplicate_text;
        return;
      }
    }
    Passage p;
    p.id = record.id ? *record.id : derive_passage_id(config_.domain, text);
    if (!ids_.emplace(p.id, passages_.size()).second)
      throw ValidationError("duplicate passage id '" + p.id + "'");
    p.title = record.title;
    p.text = text;
    p.categories = record.categories;
    p.domain = config_.domain;
    bucket.push_back(passages_.size());
    passages_.push_back(std::move(p));
  }

  void add_malformed() {
    ++report_.input;
    ++report_.malformed;
  }

  std::pair<std::vector<Passage>, IngestReport> finish() && {
    assign_batches(passages_, config_.batch_count, config_.seed);
    report_.kept = passages_.size();
    report_.batch_sizes.assign(static_cast<std::size_t>(config_.batch_count), 0);
    for (const auto& p : passages_) ++report_.batch_sizes[static_cast<std::size_t>(p.batch)];
    if (passages_.empty()) spdlog::warn("ingest: passage store is empty after filtering");
    return {std::move(passages_), std::move(report_)};
  }

 private:
  bool is_disambiguation(const std::vector<std::string>& categories) const {
    for (const auto& c : categories) {
      const std::string lower = utf8::to_lower(c);
      for (const auto& p : patterns_)
        if (lower.find(p) != std::string::npos) return true;
    }
    return false;
  }

  IngestConfig config_;
  std::vector<std::string> patterns_;
  std::vector<Passage> passages_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen_;
  std::unordered_map<std::string, std::size_t> ids_;
  IngestReport report_;
};

inline std::pair<std::vector<Passage>, IngestReport> ingest(
    const std::vector<RawRecord>& records, const IngestConfig& config) {
  Ingester ingester(config);
  for (const auto& r : records) ingester.add(r);
  return std::move(ingester).finish();
}

inline RawRecord raw_record_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  RawRecord r;
  if (auto it = j.find("id"); it != j.end() && !it->is_null()) r.id = it->get<std::string>();
  r.title = detail::optional_field<std::string>(j, "title", "");
  r.text = detail::required<std::string>(j, "text");
  r.categories = detail::optional_field<std::vector<std::string>>(j, "categories", {});
  return r;
}

/// Calls `on_line` for every line of `path`. gzip input is decompressed
/// transparently; plain files pass through unchanged.
inline void for_each_line(const std::string& path,
                          const std::function<void(std::string_view)>& on_line) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw IoError("cannot open '" + path + "'");
  std::string line;
  char buf[1 << 16];
  bool failed = false;
  while (true) {
    char* got = gzgets(file, buf, sizeof buf);
    if (got == nullptr) {
      int code = 0;
      gzerror(file, &code);
      failed = code != Z_OK && code != Z_STREAM_END;
      break;
    }
    line += got;
    if (!line.empty() && line.back() == '\n') {
      line.pop_back();
      if (!line.empty() && line.back() == '\r') line.pop_back();
      on_line(line);
      line.clear();
    }
  }
  if (!line.empty()) on_line(line);
  gzclose(file);
  if (failed) throw IoError("read failure in '" + path + "'");
}

/// Streams raw records from JSONL files (or plain-text files with one text
/// per line when the name ends in .txt / .txt.gz) into `ingester`.
inline void ingest_file(const std::string& path, Ingester& ingester) {
  const bool plain = path.ends_with(".txt") || path.ends_with(".txt.gz");
  std::size_t line_no = 0;
  for_each_line(path, [&](std::string_view line) {
    ++line_no;
    if (utf8::trim(line).empty()) return;
    if (plain) {
      ingester.add(RawRecord{std::nullopt, "", std::string(line), {}});
      return;
    }
    RawRecord record;
    try {
      record = raw_record_from_json(json::parse(line));
    } catch (const std::exception& e) {
      spdlog::warn("ingest: {}:{}: {}", path, line_no, e.what());
      ingester.add_malformed();
      return;
    }
    ingester.add(record);
  });
}

}  // namespace qaforge
