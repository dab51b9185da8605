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

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaforge/error.hpp"
#include "qaforge/textproc.hpp"

namespace qaforge {

using json = nlohmann::json;

enum class DomainTag { kWiki, kNews, kSocial, kReviews, kFiction, kOther };
enum class ModelTag { kGptStyle, kT5Style, kStub };

inline std::string_view to_string(DomainTag d) {
  switch (d) {
    case DomainTag::kWiki: return "wiki";
    case DomainTag::kNews: return "news";
    case DomainTag::kSocial: return "social";
    case DomainTag::kReviews: return "reviews";
    case DomainTag::kFiction: return "fiction";
    case DomainTag::kOther: return "other";
  }
  return "other";
}

inline DomainTag domain_from_string(std::string_view s) {
  if (s == "wiki") return DomainTag::kWiki;
  if (s == "news") return DomainTag::kNews;
  if (s == "social") return DomainTag::kSocial;
  if (s == "reviews") return DomainTag::kReviews;
  if (s == "fiction") return DomainTag::kFiction;
  if (s == "other") return DomainTag::kOther;
  throw ValidationError("unknown domain tag '" + std::string(s) + "'");
}

inline std::string_view to_string(ModelTag m) {
  switch (m) {
    case ModelTag::kGptStyle: return "gpt_style";
    case ModelTag::kT5Style: return "t5_style";
    case ModelTag::kStub: return "stub";
  }
  return "stub";
}

inline ModelTag model_tag_from_string(std::string_view s) {
  if (s == "gpt_style") return ModelTag::kGptStyle;
  if (s == "t5_style") return ModelTag::kT5Style;
  if (s == "stub") return ModelTag::kStub;
  throw ValidationError("unknown model tag '" + std::string(s) + "'");
}

struct Passage {
  std::string id;
  std::string title;
  std::string text;
  std::vector<std::string> categories;
  int batch = 0;
  DomainTag domain = DomainTag::kWiki;

  bool operator==(const Passage&) const = default;
};

struct QAPair {
  std::string question;
  std::string answer;
  int gen_index = 0;

  bool operator==(const QAPair&) const = default;
};

/// Audit record for one triplet. Exactly one of `passed` and `rejected_at`
/// holds; every stage that ran leaves at least one entry in `scores`.
struct FilterVerdict {
  bool passed = true;
  std::optional<std::string> rejected_at;
  std::map<std::string, double> scores;
  std::optional<std::string> gold_answer;
  std::vector<std::string> missing_entities;
  std::optional<int> duplicate_of;
  bool unresolved = false;

  bool operator==(const FilterVerdict&) const = default;
};

struct Triplet {
  std::string passage_id;
  QAPair pair;
  ModelTag model_tag = ModelTag::kStub;
  std::optional<FilterVerdict> verdict;

  bool operator==(const Triplet&) const = default;
};

// ---------------------------------------------------------------------------
// Filter thresholds

enum class OverlapMode { kJaccard, kOverGenerated, kOverGold };
enum class UnresolvedPolicy { kReject, kSkip };
enum class EditLevel { kCharacter, kToken };

// kPassageGroup compares each triplet against every earlier triplet of its
// passage that itself was not a duplicate, regardless of other stages;
// kSurvivors only compares against triplets that passed all earlier stages.
enum class DedupScope { kPassageGroup, kSurvivors };

struct NgramThresholds {
  double gold_vs_generated = 0.60;
  double question_vs_generated = 0.50;
  double text_vs_generated = 0.40;
  double text_vs_question = 0.40;
};

struct FilterConfig {
  double lemma_overlap_threshold = 0.70;
  double dedup_threshold = 0.70;
  int max_interrogatives = 1;
  OverlapMode overlap_mode = OverlapMode::kJaccard;
  NgramThresholds ngram_thresholds;
  double reader_score_min = 0.99;
  double wmd_low = 1.1;
  double wmd_high = 1.5;
  bool wmd_keep_inside = true;
  EditLevel dedup_level = EditLevel::kCharacter;
  DedupScope dedup_scope = DedupScope::kPassageGroup;
  UnresolvedPolicy unresolved_policy = UnresolvedPolicy::kReject;

  void validate() const {
    const auto fraction = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0))
        throw ValidationError(std::string(name) + " must be in [0,1]");
    };
    fraction(lemma_overlap_threshold, "lemma_overlap_threshold");
    fraction(dedup_threshold, "dedup_threshold");
    fraction(reader_score_min, "reader_score_min");
    fraction(ngram_thresholds.gold_vs_generated, "ngram_thresholds.gold_vs_generated");
    fraction(ngram_thresholds.question_vs_generated, "ngram_thresholds.question_vs_generated");
    fraction(ngram_thresholds.text_vs_generated, "ngram_thresholds.text_vs_generated");
    fraction(ngram_thresholds.text_vs_question, "ngram_thresholds.text_vs_question");
    if (max_interrogatives < 0) throw ValidationError("max_interrogatives must be >= 0");
    if (!(wmd_low < wmd_high)) throw ValidationError("wmd_range requires low < high");
  }
};

inline std::string_view to_string(OverlapMode m) {
  switch (m) {
    case OverlapMode::kJaccard: return "jaccard";
    case OverlapMode::kOverGenerated: return "over_generated";
    case OverlapMode::kOverGold: return "over_gold";
  }
  return "jaccard";
}

inline OverlapMode overlap_mode_from_string(std::string_view s) {
  if (s == "jaccard") return OverlapMode::kJaccard;
  if (s == "over_generated") return OverlapMode::kOverGenerated;
  if (s == "over_gold") return OverlapMode::kOverGold;
  throw ValidationError("unknown overlap mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// JSON mapping. nlohmann::json keeps object keys sorted, which is what makes
// the output byte-deterministic.

inline json to_json(const Passage& p) {
  return json{{"id", p.id},
              {"title", p.title},
              {"text", p.text},
              {"categories", p.categories},
              {"batch", p.batch},
              {"domain_tag", std::string(to_string(p.domain))}};
}

inline json to_json(const FilterVerdict& v) {
  json j{{"passed", v.passed},
         {"rejected_at", nullptr},
         {"scores", v.scores},
         {"gold_answer", nullptr},
         {"missing_entities", v.missing_entities},
         {"duplicate_of", nullptr},
         {"unresolved", v.unresolved}};
  if (v.rejected_at) j["rejected_at"] = *v.rejected_at;
  if (v.gold_answer) j["gold_answer"] = *v.gold_answer;
  if (v.duplicate_of) j["duplicate_of"] = *v.duplicate_of;
  return j;
}

inline json to_json(const Triplet& t) {
  json j{{"passage_id", t.passage_id},
         {"pair",
          {{"question", t.pair.question},
           {"answer", t.pair.answer},
           {"gen_index", t.pair.gen_index}}},
         {"model_tag", std::string(to_string(t.model_tag))},
         {"verdict", nullptr}};
  if (t.verdict) j["verdict"] = to_json(*t.verdict);
  return j;
}

namespace detail {

template <typename T>
T required(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T optional_field(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline Passage passage_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  Passage p;
  p.id = detail::required<std::string>(j, "id");
  p.title = detail::optional_field<std::string>(j, "title", "");
  p.text = detail::required<std::string>(j, "text");
  p.categories = detail::optional_field<std::vector<std::string>>(j, "categories", {});
  p.batch = detail::optional_field<int>(j, "batch", 0);
  p.domain = domain_from_string(detail::optional_field<std::string>(j, "domain_tag", "wiki"));
  if (p.id.empty()) throw ValidationError("empty passage id");
  if (utf8::trim(p.text).empty()) throw ValidationError("empty passage text");
  if (p.batch < 0) throw ValidationError("negative batch id");
  return p;
}

inline FilterVerdict verdict_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("verdict is not a JSON object");
  FilterVerdict v;
  v.passed = detail::required<bool>(j, "passed");
  if (auto it = j.find("rejected_at"); it != j.end() && !it->is_null())
    v.rejected_at = it->get<std::string>();
  v.scores = detail::optional_field<std::map<std::string, double>>(j, "scores", {});
  if (auto it = j.find("gold_answer"); it != j.end() && !it->is_null())
    v.gold_answer = it->get<std::string>();
  v.missing_entities =
      detail::optional_field<std::vector<std::string>>(j, "missing_entities", {});
  if (auto it = j.find("duplicate_of"); it != j.end() && !it->is_null())
    v.duplicate_of = it->get<int>();
  v.unresolved = detail::optional_field<bool>(j, "unresolved", false);
  if (v.passed == v.rejected_at.has_value())
    throw ValidationError("verdict must have exactly one of passed / rejected_at");
  return v;
}

inline Triplet triplet_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  Triplet t;
  t.passage_id = detail::required<std::string>(j, "passage_id");
  const json& pair = j.at("pair");
  t.pair.question = detail::required<std::string>(pair, "question");
  t.pair.answer = detail::required<std::string>(pair, "answer");
  t.pair.gen_index = detail::required<int>(pair, "gen_index");
  t.model_tag = model_tag_from_string(detail::optional_field<std::string>(j, "model_tag", "stub"));
  if (auto it = j.find("verdict"); it != j.end() && !it->is_null())
    t.verdict = verdict_from_json(*it);
  if (utf8::trim(t.pair.question).empty() || utf8::trim(t.pair.answer).empty())
    throw ValidationError("question and answer must be non-empty");
  if (t.pair.gen_index < 0) throw ValidationError("negative gen_index");
  return t;
}

// ---------------------------------------------------------------------------
// JSONL streams

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename T>
struct ReadResult {
  std::vector<T> items;
  std::vector<LineError> errors;
};

struct ReadOptions {
  // Malformed lines beyond this many abort the read.
  std::size_t max_errors = 100;
};

namespace detail {

template <typename T, typename Parse, typename OnItem>
ReadResult<T> read_jsonl(std::istream& in, const ReadOptions& options,
                         Parse parse, OnItem on_item) {
  ReadResult<T> result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (utf8::trim(line).empty()) continue;
    try {
      T item = parse(json::parse(line));
      on_item(item, line_no);
      result.items.push_back(std::move(item));
    } catch (const json::exception& e) {
      result.errors.push_back({line_no, std::string("malformed JSON: ") + e.what()});
    } catch (const ValidationError& e) {
      if (std::string_view(e.what()).starts_with("duplicate")) throw;
      result.errors.push_back({line_no, e.what()});
    }
    if (result.errors.size() > options.max_errors) {
      throw ValidationError("too many malformed lines (more than " +
                            std::to_string(options.max_errors) + "), last at line " +
                            std::to_string(line_no) + ": " +
                            result.errors.back().message);
    }
  }
  if (in.bad()) throw IoError("read failure after line " + std::to_string(line_no));
  return result;
}

}  // namespace detail

/// Reads one passage per line. Malformed lines are collected (up to the
/// cap); a repeated id is a hard error naming the offending line.
inline ReadResult<Passage> read_passages(std::istream& in, const ReadOptions& options = {}) {
  std::unordered_set<std::string> seen;
  return detail::read_jsonl<Passage>(
      in, options, passage_from_json, [&seen](const Passage& p, std::size_t line) {
        if (!seen.insert(p.id).second) {
          throw ValidationError("duplicate passage id '" + p.id + "' at line " +
                                std::to_string(line));
        }
      });
}

inline ReadResult<Triplet> read_triplets(std::istream& in, const ReadOptions& options = {}) {
  return detail::read_jsonl<Triplet>(in, options, triplet_from_json,
                                     [](const Triplet&, std::size_t) {});
}

/// Thrown when a sink fails mid-write; carries how many records made it.
class WriteError : public IoError {
 public:
  WriteError(const std::string& what, std::size_t written)
      : IoError(what + " (" + std::to_string(written) + " records written)"),
        written_(written) {}
  std::size_t written() const { return written_; }

 private:
  std::size_t written_;
};

template <typename T>
std::size_t write_jsonl(std::span<const T> items, std::ostream& out) {
  std::size_t written = 0;
  std::string line;
  for (const auto& item : items) {
    line = to_json(item).dump(-1, ' ', false, json::error_handler_t::replace);
    line.push_back('\n');
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    if (!out) throw WriteError("write failure", written);
    ++written;
  }
  out.flush();
  if (!out) throw WriteError("flush failure", written);
  return written;
}

inline std::size_t write_triplets(std::span<const Triplet> triplets, std::ostream& out) {
  return write_jsonl<Triplet>(triplets, out);
}

inline std::size_t write_passages(std::span<const Passage> passages, std::ostream& out) {
  return write_jsonl<Passage>(passages, out);
}

}  // namespace qaforge
