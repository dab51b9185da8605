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
#include <atomic>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "qaforge/corpus_model.hpp"
#include "qaforge/error.hpp"
#include "qaforge/metrics.hpp"
#include "qaforge/textproc.hpp"

namespace qaforge {

// ---------------------------------------------------------------------------
// Reader role

struct ReaderAnswer {
  std::string answer;
  double score = 0.0;
};

class Reader {
 public:
  virtual ~Reader() = default;
  virtual std::string name() const = 0;
  /// Extractive answer to `question` from `context`. May throw ProviderError.
  virtual ReaderAnswer answer(std::string_view context, std::string_view question) const = 0;
};

/// Offline extractive reader. Picks the context sentence sharing the most
/// lowercase tokens with the question and answers with up to two tokens that
/// follow the last shared token there. The answer is always a contiguous
/// slice of the context; the score is the shared-token fraction.
class ExtractiveStubReader final : public Reader {
 public:
  std::string name() const override { return "stub-reader"; }

  ReaderAnswer answer(std::string_view context, std::string_view question) const override {
    std::set<std::string> q;
    for (const auto& t : tokenize(question)) q.insert(utf8::to_lower(t.surface));
    const auto tokens = tokenize(context);
    if (tokens.empty() || q.empty()) return {"", 0.0};

    // Sentence boundaries: a '.', '!' or '?' between two tokens.
    std::vector<std::size_t> sentence_of(tokens.size(), 0);
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      const std::string_view gap =
          context.substr(tokens[i - 1].end, tokens[i].start - tokens[i - 1].end);
      const bool boundary = gap.find_first_of(".!?") != std::string_view::npos;
      sentence_of[i] = sentence_of[i - 1] + (boundary ? 1 : 0);
    }
    std::map<std::size_t, std::set<std::string>> shared;
    std::map<std::size_t, std::size_t> last_shared;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::string lower = utf8::to_lower(tokens[i].surface);
      if (q.count(lower)) {
        shared[sentence_of[i]].insert(lower);
        last_shared[sentence_of[i]] = i;
      }
    }
    if (shared.empty()) {
      const std::size_t end = std::min<std::size_t>(2, tokens.size());
      return {std::string(context.substr(tokens[0].start, tokens[end - 1].end - tokens[0].start)),
              0.0};
    }
    std::size_t best = shared.begin()->first;
    for (const auto& [s, words] : shared)
      if (words.size() > shared[best].size()) best = s;
    std::size_t first = last_shared[best] + 1;
    if (first >= tokens.size() || sentence_of[first] != best) first = last_shared[best];
    std::size_t last = first;
    if (last + 1 < tokens.size() && sentence_of[last + 1] == best) ++last;
    return {std::string(context.substr(tokens[first].start, tokens[last].end - tokens[first].start)),
            static_cast<double>(shared[best].size()) / static_cast<double>(q.size())};
  }
};

/// Fixed answers keyed by (context, question); an empty context key matches
/// any context. Unknown questions fail as unavailable.
class TableReader final : public Reader {
 public:
  using Key = std::pair<std::string, std::string>;

  explicit TableReader(std::map<Key, ReaderAnswer> table) : table_(std::move(table)) {}
  explicit TableReader(const std::map<std::string, ReaderAnswer>& by_question) {
    for (const auto& [q, a] : by_question) table_[{"", q}] = a;
  }

  std::string name() const override { return "table-reader"; }

  ReaderAnswer answer(std::string_view context, std::string_view question) const override {
    auto it = table_.find({std::string(context), std::string(question)});
    if (it == table_.end()) it = table_.find({"", std::string(question)});
    if (it == table_.end())
      throw ProviderError(ProviderError::Kind::kUnavailable, name(),
                          "no answer for question '" + std::string(question) + "'");
    return it->second;
  }

 private:
  std::map<Key, ReaderAnswer> table_;
};

// ---------------------------------------------------------------------------
// Stage plan

enum class StageId {
  kInterrogative,
  kGoldAgreement,
  kEntityConsistency,
  kDedup,
  kNgramMetrics,
  kPersonLocation,
  kReaderScore,
  kWmd,
};

inline std::string_view stage_name(StageId id) {
  switch (id) {
    case StageId::kInterrogative: return "interrogative";
    case StageId::kGoldAgreement: return "gold_agreement";
    case StageId::kEntityConsistency: return "entity_consistency";
    case StageId::kDedup: return "dedup";
    case StageId::kNgramMetrics: return "opt_ngram_metrics";
    case StageId::kPersonLocation: return "opt_person_location";
    case StageId::kReaderScore: return "opt_reader_score";
    case StageId::kWmd: return "opt_wmd";
  }
  return "?";
}

inline StageId stage_from_name(std::string_view name) {
  for (StageId id : {StageId::kInterrogative, StageId::kGoldAgreement,
                     StageId::kEntityConsistency, StageId::kDedup, StageId::kNgramMetrics,
                     StageId::kPersonLocation, StageId::kReaderScore, StageId::kWmd}) {
    if (stage_name(id) == name) return id;
  }
  throw ValidationError("unknown filter stage '" + std::string(name) + "'");
}

inline bool needs_gold(StageId id) {
  return id == StageId::kGoldAgreement || id == StageId::kNgramMetrics ||
         id == StageId::kReaderScore || id == StageId::kWmd;
}

struct StagePlan {
  std::vector<StageId> order;
  std::set<StageId> enabled;

  /// The four mandatory stages on in their fixed order (gold agreement
  /// before entity consistency, dedup last); optional stages sit next to the
  /// step they extend and start disabled.
  static StagePlan standard() {
    StagePlan plan;
    plan.order = {StageId::kInterrogative,    StageId::kGoldAgreement,
                  StageId::kReaderScore,      StageId::kNgramMetrics,
                  StageId::kWmd,              StageId::kEntityConsistency,
                  StageId::kPersonLocation,   StageId::kDedup};
    plan.enabled = {StageId::kInterrogative, StageId::kGoldAgreement,
                    StageId::kEntityConsistency, StageId::kDedup};
    return plan;
  }

  static StagePlan none() {
    StagePlan plan = standard();
    plan.enabled.clear();
    return plan;
  }

  bool is_enabled(StageId id) const { return enabled.count(id) > 0; }

  std::vector<StageId> active() const {
    std::vector<StageId> out;
    for (StageId id : order)
      if (is_enabled(id)) out.push_back(id);
    return out;
  }

  void validate() const {
    std::set<StageId> seen;
    for (StageId id : order)
      if (!seen.insert(id).second)
        throw ValidationError("stage '" + std::string(stage_name(id)) + "' listed twice");
    for (StageId id : enabled)
      if (!seen.count(id))
        throw ValidationError("enabled stage '" + std::string(stage_name(id)) + "' not in order");
    const auto pos = [&](StageId id) {
      return std::find(order.begin(), order.end(), id) - order.begin();
    };
    if (is_enabled(StageId::kDedup) && order.back() != StageId::kDedup)
      throw ValidationError("dedup must be the last stage");
    if (is_enabled(StageId::kGoldAgreement) && is_enabled(StageId::kEntityConsistency) &&
        pos(StageId::kEntityConsistency) < pos(StageId::kGoldAgreement))
      throw ValidationError("entity_consistency must run after gold_agreement");
  }
};

// ---------------------------------------------------------------------------
// Stage fragments

struct Providers {
  const Reader* reader = nullptr;
  const EntityRecognizer* ner = nullptr;
  const Lemmatizer* lemmatizer = nullptr;
  const Embedder* embedder = nullptr;
  bool ner_fallback = true;
  bool lemma_fallback = true;
};

/// Result of one stage on one triplet.
struct StageOutcome {
  bool pass = true;
  bool unresolved = false;
  std::map<std::string, double> scores;
  std::vector<std::string> missing_entities;
  std::optional<std::string> gold_answer;
};

/// Reader response shared by every gold-dependent stage of one triplet.
struct GoldLookup {
  std::optional<ReaderAnswer> answer;
  std::optional<std::string> error;
};

inline GoldLookup ask_reader(const Triplet& t, const Passage& p, const Reader* reader) {
  GoldLookup g;
  if (reader == nullptr) {
    g.error = "no reader configured";
    return g;
  }
  try {
    ReaderAnswer a = reader->answer(p.text, t.pair.question);
    if (!(a.score >= 0.0 && a.score <= 1.0)) {
      g.error = "reader score outside [0,1]";
    } else {
      g.answer = std::move(a);
    }
  } catch (const ProviderError& e) {
    g.error = e.what();
  }
  return g;
}

inline StageOutcome unresolved_outcome(StageId id) {
  StageOutcome out;
  out.pass = false;
  out.unresolved = true;
  out.scores[std::string(stage_name(id)) + "_unresolved"] = 1.0;
  return out;
}

/// Rejects questions with more than `max_interrogatives` interrogative words.
inline StageOutcome stage_interrogative(const Triplet& t, const WhLexicon& lexicon,
                                        const FilterConfig& config,
                                        const Lemmatizer* lemmatizer = nullptr) {
  StageOutcome out;
  const std::size_t count = count_interrogatives(t.pair.question, lexicon, lemmatizer);
  out.scores["interrogatives"] = static_cast<double>(count);
  out.pass = count <= static_cast<std::size_t>(config.max_interrogatives);
  return out;
}

/// Lemma overlap between generated and reader answers; passes at or above
/// the threshold.
inline StageOutcome stage_gold_agreement(const Triplet& t, const GoldLookup& gold,
                                         const FilterConfig& config,
                                         const Lemmatizer* lemmatizer = nullptr) {
  if (!gold.answer) return unresolved_outcome(StageId::kGoldAgreement);
  StageOutcome out;
  const double overlap =
      lemma_overlap(t.pair.answer, gold.answer->answer, config.overlap_mode, lemmatizer);
  out.scores["lemma_overlap"] = overlap;
  out.scores["reader_score"] = gold.answer->score;
  out.gold_answer = gold.answer->answer;
  out.pass = overlap >= config.lemma_overlap_threshold;
  return out;
}

inline StageOutcome stage_gold_agreement(const Triplet& t, const Passage& p,
                                         const Reader* reader, const FilterConfig& config,
                                         const Lemmatizer* lemmatizer = nullptr) {
  return stage_gold_agreement(t, ask_reader(t, p, reader), config, lemmatizer);
}

namespace detail {

// Entities of the question and answer whose lowercase text is not a
// substring of the lowercase passage. `kinds` empty means any kind.
inline std::vector<std::string> missing_entities(const Triplet& t, const Passage& p,
                                                 const Providers& providers,
                                                 const std::set<EntityKind>& kinds,
                                                 std::map<EntityKind, std::size_t>* per_kind) {
  const std::string passage = utf8::to_lower(p.text);
  std::vector<std::string> missing;
  for (const std::string* field : {&t.pair.question, &t.pair.answer}) {
    for (const Entity& e : extract_entities(*field, providers.ner, providers.ner_fallback)) {
      if (!kinds.empty() && !kinds.count(e.kind)) continue;
      if (passage.find(utf8::to_lower(e.text)) == std::string::npos) {
        missing.push_back(e.text);
        if (per_kind) ++(*per_kind)[e.kind];
      }
    }
  }
  return missing;
}

}  // namespace detail

/// Every entity in question and answer must occur in the passage (case
/// insensitive string match).
inline StageOutcome stage_entity_consistency(const Triplet& t, const Passage& p,
                                             const Providers& providers) {
  StageOutcome out;
  try {
    out.missing_entities = detail::missing_entities(t, p, providers, {}, nullptr);
  } catch (const ProviderError&) {
    return unresolved_outcome(StageId::kEntityConsistency);
  }
  out.scores["entities_missing"] = static_cast<double>(out.missing_entities.size());
  out.pass = out.missing_entities.empty();
  return out;
}

/// Persons and locations checked separately; either kind missing rejects.
inline StageOutcome opt_person_location(const Triplet& t, const Passage& p,
                                        const Providers& providers) {
  StageOutcome out;
  std::map<EntityKind, std::size_t> per_kind;
  try {
    out.missing_entities = detail::missing_entities(
        t, p, providers, {EntityKind::kPerson, EntityKind::kLocation}, &per_kind);
  } catch (const ProviderError&) {
    return unresolved_outcome(StageId::kPersonLocation);
  }
  out.scores["persons_missing"] = static_cast<double>(per_kind[EntityKind::kPerson]);
  out.scores["locations_missing"] = static_cast<double>(per_kind[EntityKind::kLocation]);
  out.pass = per_kind[EntityKind::kPerson] == 0 && per_kind[EntityKind::kLocation] == 0;
  return out;
}

/// Mean of BLEU, ROUGE-L and METEOR-lite on lemma sequences for the pairs
/// (gold answer, generated answer), (question, generated answer),
/// (text, generated answer), (text, question); the first member of each
/// pair is the reference. Any mean under its threshold rejects.
inline StageOutcome opt_ngram_metrics(const Triplet& t, const Passage& p,
                                      const GoldLookup& gold, const FilterConfig& config,
                                      const Lemmatizer* lemmatizer = nullptr) {
  if (!gold.answer) return unresolved_outcome(StageId::kNgramMetrics);
  StageOutcome out;
  const auto lemmas = [lemmatizer](std::string_view s) {
    auto tokens = tokenize(s);
    lemmatize(tokens, lemmatizer);
    return tokens;
  };
  const auto mean_metric = [](const std::vector<Token>& ref, const std::vector<Token>& cand) {
    std::vector<std::string> r, c;
    for (const auto& t : ref) r.push_back(t.lemma);
    for (const auto& t : cand) c.push_back(t.lemma);
    const double b = c.empty() ? 0.0 : bleu(c, {r});
    const double rl = rouge_l(r, c);
    const double m = meteor_lite(std::span<const Token>(cand), std::span<const Token>(ref));
    return (b + rl + m) / 3.0;
  };
  const auto gold_t = lemmas(gold.answer->answer);
  const auto question = lemmas(t.pair.question);
  const auto answer = lemmas(t.pair.answer);
  const auto text = lemmas(p.text);
  const NgramThresholds& th = config.ngram_thresholds;
  const std::pair<const char*, std::pair<double, double>> checks[] = {
      {"ngram_gold_vs_generated", {mean_metric(gold_t, answer), th.gold_vs_generated}},
      {"ngram_question_vs_generated", {mean_metric(question, answer), th.question_vs_generated}},
      {"ngram_text_vs_generated", {mean_metric(text, answer), th.text_vs_generated}},
      {"ngram_text_vs_question", {mean_metric(text, question), th.text_vs_question}},
  };
  for (const auto& [key, value] : checks) {
    out.scores[key] = value.first;
    if (value.first < value.second) out.pass = false;
  }
  out.gold_answer = gold.answer->answer;
  return out;
}

/// Rejects unless the reader confidence is strictly above the minimum.
inline StageOutcome opt_reader_score(const GoldLookup& gold, const FilterConfig& config) {
  if (!gold.answer) return unresolved_outcome(StageId::kReaderScore);
  StageOutcome out;
  out.scores["reader_score"] = gold.answer->score;
  out.gold_answer = gold.answer->answer;
  out.pass = gold.answer->score > config.reader_score_min;
  return out;
}

/// Word mover's distance between generated and gold answer lemmas. With
/// keep-inside polarity a triplet passes iff the distance lies in
/// [wmd_low, wmd_high]; the opposite polarity passes iff it lies outside.
inline StageOutcome opt_wmd(const Triplet& t, const GoldLookup& gold,
                            const Embedder* embedder, const FilterConfig& config,
                            const Lemmatizer* lemmatizer = nullptr) {
  if (!gold.answer || embedder == nullptr) return unresolved_outcome(StageId::kWmd);
  StageOutcome out;
  double distance = 0.0;
  try {
    distance = word_movers_distance(lemmas_of(t.pair.answer, lemmatizer),
                                    lemmas_of(gold.answer->answer, lemmatizer), *embedder);
  } catch (const ValidationError&) {
    return unresolved_outcome(StageId::kWmd);
  } catch (const ProviderError&) {
    return unresolved_outcome(StageId::kWmd);
  }
  out.scores["wmd"] = distance;
  const bool inside = distance >= config.wmd_low && distance <= config.wmd_high;
  out.pass = config.wmd_keep_inside ? inside : !inside;
  out.gold_answer = gold.answer->answer;
  return out;
}

// ---------------------------------------------------------------------------
// Dedup

struct DedupDecision {
  std::optional<int> duplicate_of;  // gen_index of the earlier survivor
  double question_sim = 0.0;
  double answer_sim = 0.0;
};

/// Greedy scan in the given order: an item is a duplicate iff some earlier
/// non-duplicate has both question and answer similarity strictly above
/// the threshold. Recorded similarities are for the matching survivor, or
/// the closest earlier survivor when there is no match.
inline std::vector<DedupDecision> find_duplicates(const std::vector<const QAPair*>& pairs,
                                                  const FilterConfig& config) {
  const auto sim = [&config](const std::string& a, const std::string& b) {
    return config.dedup_level == EditLevel::kCharacter ? levenshtein_similarity(a, b)
                                                       : levenshtein_similarity_tokens(a, b);
  };
  std::vector<DedupDecision> out(pairs.size());
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    double best = -1.0;
    for (std::size_t s : survivors) {
      const double qs = sim(pairs[i]->question, pairs[s]->question);
      const double as = sim(pairs[i]->answer, pairs[s]->answer);
      if (qs > config.dedup_threshold && as > config.dedup_threshold) {
        out[i] = {pairs[s]->gen_index, qs, as};
        break;
      }
      if (std::min(qs, as) > best) {
        best = std::min(qs, as);
        out[i].question_sim = qs;
        out[i].answer_sim = as;
      }
    }
    if (!out[i].duplicate_of) survivors.push_back(i);
  }
  return out;
}

struct DedupResult {
  std::vector<Triplet> survivors;
  std::vector<Triplet> all;  // gen_index order, every triplet with a verdict
};

/// Dedup of one passage's triplets, in gen_index order.
inline DedupResult stage_dedup(std::vector<Triplet> group, const FilterConfig& config) {
  for (const auto& t : group) {
    if (t.passage_id != group.front().passage_id)
      throw ValidationError("stage_dedup: triplets span several passages");
  }
  std::stable_sort(group.begin(), group.end(), [](const Triplet& a, const Triplet& b) {
    return a.pair.gen_index < b.pair.gen_index;
  });
  std::vector<const QAPair*> pairs;
  for (const auto& t : group) pairs.push_back(&t.pair);
  const auto decisions = find_duplicates(pairs, config);
  DedupResult result;
  for (std::size_t i = 0; i < group.size(); ++i) {
    Triplet t = group[i];
    FilterVerdict v = t.verdict.value_or(FilterVerdict{});
    v.scores["question_sim"] = decisions[i].question_sim;
    v.scores["answer_sim"] = decisions[i].answer_sim;
    if (decisions[i].duplicate_of) {
      v.passed = false;
      v.rejected_at = std::string(stage_name(StageId::kDedup));
      v.duplicate_of = decisions[i].duplicate_of;
    }
    t.verdict = v;
    if (v.passed) result.survivors.push_back(t);
    result.all.push_back(std::move(t));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Pipeline

struct FilterReport {
  std::size_t input = 0;
  std::size_t survivors = 0;
  std::size_t unresolved = 0;
  std::map<std::string, std::size_t> per_stage;

  void merge(const FilterReport& other) {
    input += other.input;
    survivors += other.survivors;
    unresolved += other.unresolved;
    for (const auto& [k, v] : other.per_stage) per_stage[k] += v;
  }

  double survival_ratio() const {
    return input == 0 ? 0.0 : static_cast<double>(survivors) / static_cast<double>(input);
  }

  json to_json() const {
    return json{{"input", input},
                {"survivors", survivors},
                {"survival_ratio", survival_ratio()},
                {"per_stage", per_stage},
                {"unresolved", unresolved}};
  }

  bool operator==(const FilterReport&) const = default;
};

using PassageIndex = std::unordered_map<std::string, const Passage*>;

inline PassageIndex index_passages(const std::vector<Passage>& passages) {
  PassageIndex index;
  for (const auto& p : passages) index.emplace(p.id, &p);
  return index;
}

/// Runs the cascade. Per-triplet stages run in plan order and stop at the
/// first rejection; dedup then runs per passage group. Groups are processed
/// in parallel and written back in place, so output order and verdicts do
/// not depend on the worker count.
class FilterEngine {
 public:
  FilterEngine(FilterConfig config, StagePlan plan, Providers providers,
               WhLexicon lexicon = WhLexicon::russian_default(), std::size_t workers = 1)
      : config_(config),
        plan_(std::move(plan)),
        providers_(providers),
        lexicon_(std::move(lexicon)),
        workers_(std::max<std::size_t>(1, workers)) {
    config_.validate();
    plan_.validate();
    for (StageId id : plan_.active()) report_template_.per_stage[std::string(stage_name(id))] = 0;
  }

  const StagePlan& plan() const { return plan_; }

  /// Filters `triplets` in place (every one gets a verdict) and returns the
  /// report for this call. Triplets of one passage are grouped by id.
  FilterReport run(std::vector<Triplet>& triplets, const PassageIndex& passages) const {
    std::vector<std::vector<std::size_t>> groups;
    std::unordered_map<std::string_view, std::size_t> group_of;
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      auto [it, inserted] = group_of.emplace(triplets[i].passage_id, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(i);
    }
    std::vector<const Passage*> group_passage(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const std::string& id = triplets[groups[g].front()].passage_id;
      auto it = passages.find(id);
      if (it == passages.end())
        throw ValidationError("triplet references unknown passage '" + id + "'");
      group_passage[g] = it->second;
    }

    std::vector<FilterReport> reports(groups.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto work = [&] {
      for (std::size_t g = next++; g < groups.size(); g = next++) {
        try {
          reports[g] = run_group(triplets, groups[g], *group_passage[g]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    if (workers_ == 1 || groups.size() < 2) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < std::min(workers_, groups.size()); ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    FilterReport total = report_template_;
    for (const auto& r : reports) total.merge(r);
    return total;
  }

 private:
  FilterReport run_group(std::vector<Triplet>& triplets, std::vector<std::size_t> members,
                         const Passage& passage) const {
    FilterReport report;
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return triplets[a].pair.gen_index < triplets[b].pair.gen_index;
    });
    const auto active = plan_.active();
    for (std::size_t i : members) {
      Triplet& t = triplets[i];
      FilterVerdict v;
      std::optional<GoldLookup> gold;
      for (StageId id : active) {
        if (id == StageId::kDedup) continue;
        if (needs_gold(id) && !gold) gold = ask_reader(t, passage, providers_.reader);
        StageOutcome out = run_stage(id, t, passage, gold);
        for (auto& [k, s] : out.scores) v.scores[k] = s;
        if (out.gold_answer) v.gold_answer = out.gold_answer;
        if (!out.missing_entities.empty()) v.missing_entities = out.missing_entities;
        if (out.unresolved) {
          v.unresolved = true;
          if (config_.unresolved_policy == UnresolvedPolicy::kSkip) continue;
        }
        if (!out.pass) {
          v.passed = false;
          v.rejected_at = std::string(stage_name(id));
          break;
        }
      }
      t.verdict = std::move(v);
    }

    if (plan_.is_enabled(StageId::kDedup)) {
      std::vector<std::size_t> scan;
      for (std::size_t i : members) {
        if (config_.dedup_scope == DedupScope::kPassageGroup || triplets[i].verdict->passed)
          scan.push_back(i);
      }
      std::vector<const QAPair*> pairs;
      for (std::size_t i : scan) pairs.push_back(&triplets[i].pair);
      const auto decisions = find_duplicates(pairs, config_);
      for (std::size_t k = 0; k < scan.size(); ++k) {
        FilterVerdict& v = *triplets[scan[k]].verdict;
        if (!v.passed) continue;
        v.scores["question_sim"] = decisions[k].question_sim;
        v.scores["answer_sim"] = decisions[k].answer_sim;
        if (decisions[k].duplicate_of) {
          v.passed = false;
          v.rejected_at = std::string(stage_name(StageId::kDedup));
          v.duplicate_of = decisions[k].duplicate_of;
        }
      }
    }

    for (std::size_t i : members) {
      const FilterVerdict& v = *triplets[i].verdict;
      ++report.input;
      if (v.unresolved) ++report.unresolved;
      if (v.passed) {
        ++report.survivors;
      } else if (!(v.unresolved && v.scores.count(*v.rejected_at + "_unresolved"))) {
        ++report.per_stage[*v.rejected_at];
      }
    }
    return report;
  }

  StageOutcome run_stage(StageId id, const Triplet& t, const Passage& p,
                         const std::optional<GoldLookup>& gold) const {
    const Lemmatizer* lem = providers_.lemmatizer;
    switch (id) {
      case StageId::kInterrogative: return stage_interrogative(t, lexicon_, config_, lem);
      case StageId::kGoldAgreement: return stage_gold_agreement(t, *gold, config_, lem);
      case StageId::kEntityConsistency: return stage_entity_consistency(t, p, providers_);
      case StageId::kNgramMetrics: return opt_ngram_metrics(t, p, *gold, config_, lem);
      case StageId::kPersonLocation: return opt_person_location(t, p, providers_);
      case StageId::kReaderScore: return opt_reader_score(*gold, config_);
      case StageId::kWmd: return opt_wmd(t, *gold, providers_.embedder, config_, lem);
      case StageId::kDedup: break;
    }
    return {};
  }

  FilterConfig config_;
  StagePlan plan_;
  Providers providers_;
  WhLexicon lexicon_;
  std::size_t workers_;
  FilterReport report_template_;
};

}  // namespace qaforge
