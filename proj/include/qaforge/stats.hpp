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
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaforge/corpus_model.hpp"
#include "qaforge/error.hpp"
#include "qaforge/metrics.hpp"
#include "qaforge/textproc.hpp"

namespace qaforge {

/// Fraction of questions whose lemma set contains each lexicon word.
inline std::map<std::string, double> wh_ratios(const std::vector<std::string>& questions,
                                               const WhLexicon& lexicon,
                                               const Lemmatizer* lemmatizer = nullptr) {
  if (questions.empty()) throw ValidationError("wh_ratios: no questions");
  std::map<std::string, std::size_t> hits;
  for (const auto& w : lexicon.words) hits[w] = 0;
  for (const auto& q : questions) {
    const auto lemmas = lemmas_of(q, lemmatizer);
    const std::set<std::string> unique(lemmas.begin(), lemmas.end());
    for (const auto& l : unique)
      if (lexicon.contains(l)) ++hits[l];
  }
  std::map<std::string, double> out;
  for (const auto& [w, n] : hits)
    out[w] = static_cast<double>(n) / static_cast<double>(questions.size());
  return out;
}

struct LengthStats {
  double avg_q_chars = 0.0;
  double avg_q_tokens = 0.0;
  double avg_a_chars = 0.0;
  double avg_a_tokens = 0.0;
};

/// Means of code-point and token lengths of questions and answers.
inline LengthStats length_stats(const std::vector<QAPair>& pairs) {
  if (pairs.empty()) throw ValidationError("length_stats: no pairs");
  std::size_t qc = 0, qt = 0, ac = 0, at = 0;
  for (const auto& p : pairs) {
    qc += utf8::length(p.question);
    qt += tokenize(p.question).size();
    ac += utf8::length(p.answer);
    at += tokenize(p.answer).size();
  }
  const double n = static_cast<double>(pairs.size());
  return {static_cast<double>(qc) / n, static_cast<double>(qt) / n,
          static_cast<double>(ac) / n, static_cast<double>(at) / n};
}

inline LengthStats length_stats(const std::vector<Triplet>& triplets) {
  std::vector<QAPair> pairs;
  pairs.reserve(triplets.size());
  for (const auto& t : triplets) pairs.push_back(t.pair);
  return length_stats(pairs);
}

/// The k most frequent lemmas, by count then lexicographically.
inline std::vector<std::pair<std::string, std::size_t>> top_lemmas(
    const std::vector<std::string>& strings, std::size_t k,
    const Lemmatizer* lemmatizer = nullptr,
    const std::set<std::string>& stopwords = WhLexicon::russian_default().words) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& s : strings)
    for (auto& l : lemmas_of(s, lemmatizer))
      if (!stopwords.count(l)) ++counts[std::move(l)];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

// ---------------------------------------------------------------------------
// Category groups

struct CategoryGroup {
  std::string name;
  std::vector<std::string> patterns;  // lowercase substrings
};

using CategoryGroups = std::vector<CategoryGroup>;

/// Parses `name: pattern, pattern, ...` lines; '#' starts a comment.
inline CategoryGroups parse_category_groups(std::string_view text) {
  CategoryGroups groups;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = utf8::trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos)
      throw ValidationError("category groups line " + std::to_string(line_no) + ": missing ':'");
    CategoryGroup g{std::string(utf8::trim(line.substr(0, colon))), {}};
    std::string_view rest = line.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = utf8::trim(rest.substr(0, comma));
      if (!item.empty()) g.patterns.push_back(utf8::to_lower(item));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (g.name.empty() || g.patterns.empty())
      throw ValidationError("category groups line " + std::to_string(line_no) +
                            ": empty name or pattern list");
    groups.push_back(std::move(g));
  }
  return groups;
}

inline CategoryGroups load_category_groups(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open category groups file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_category_groups(text);
}

inline const CategoryGroups& default_category_groups() {
  static const CategoryGroups groups = parse_category_groups(
      "history: истори, войн, сражени, революци, древн, средневеков\n"
      "biographies: родивш, умерш, персоналии, деятели, учёные, писатели, политики\n"
      "plants: растени, флора, цветков, деревья, ботаник\n"
      "technical: техник, технолог, программ, компьютер, оружи, транспорт, инженер\n"
      "geography: географи, населённые пункты, города, реки, озёра, горы, страны, регион\n"
      "mathematics: математик, алгебр, геометри, теори чисел, топологи\n"
      "sports: спорт, футбол, хоккей, олимпийск, чемпионат, спортсмен\n"
      "actors: актёр, актрис, актёры\n"
      "movies: фильм, кинематограф, телесериал, мультфильм\n");
  return groups;
}

inline std::vector<std::string> groups_of(const Passage& p, const CategoryGroups& groups) {
  std::vector<std::string> hit;
  for (const auto& g : groups) {
    bool match = false;
    for (const auto& c : p.categories) {
      const std::string lower = utf8::to_lower(c);
      for (const auto& pat : g.patterns)
        if (lower.find(pat) != std::string::npos) match = true;
    }
    if (match) hit.push_back(g.name);
  }
  return hit;
}

inline bool survived(const Triplet& t) { return !t.verdict || t.verdict->passed; }

/// survivors / total per category group. A triplet without a verdict counts
/// as a survivor; groups without triplets are absent.
inline std::map<std::string, double> category_retention(
    const std::vector<Triplet>& triplets, const std::vector<Passage>& passages,
    const CategoryGroups& groups = default_category_groups()) {
  std::unordered_map<std::string, std::vector<std::string>> membership;
  for (const auto& p : passages) membership[p.id] = groups_of(p, groups);
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;
  for (const auto& t : triplets) {
    auto it = membership.find(t.passage_id);
    if (it == membership.end()) continue;
    for (const auto& g : it->second) {
      ++tally[g].second;
      if (survived(t)) ++tally[g].first;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [g, c] : tally)
    out[g] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct DiagnosticsReport {
  double self_bleu_median = 0.0;
  std::size_t self_bleu_sample = 0;
  std::map<std::string, double> wh_ratios;
  LengthStats lengths;
  std::vector<std::pair<std::string, std::size_t>> top_lemmas_q;
  std::vector<std::pair<std::string, std::size_t>> top_lemmas_a;
  std::map<std::string, double> per_category_retention;
  std::size_t triplets = 0;
  std::size_t survivors = 0;

  json to_json() const {
    const auto ranked = [](const auto& list) {
      json arr = json::array();
      for (const auto& [l, n] : list) arr.push_back(json{{"lemma", l}, {"count", n}});
      return arr;
    };
    return json{{"self_bleu_median", self_bleu_median},
                {"self_bleu_sample", self_bleu_sample},
                {"wh_ratios", wh_ratios},
                {"avg_q_chars", lengths.avg_q_chars},
                {"avg_q_tokens", lengths.avg_q_tokens},
                {"avg_a_chars", lengths.avg_a_chars},
                {"avg_a_tokens", lengths.avg_a_tokens},
                {"top_lemmas_q", ranked(top_lemmas_q)},
                {"top_lemmas_a", ranked(top_lemmas_a)},
                {"per_category_retention", per_category_retention},
                {"triplets", triplets},
                {"survivors", survivors}};
  }
};

struct DiversityOptions {
  std::uint64_t seed = 0;
  std::size_t self_bleu_sample = 5000;
  std::size_t top_k = 10;
  std::size_t workers = 1;
  const Lemmatizer* lemmatizer = nullptr;
  WhLexicon lexicon = WhLexicon::russian_default();
  CategoryGroups groups = default_category_groups();
};

/// Diagnostics over the survivors of `triplets`; retention over all of them.
/// Questions are put in canonical order before sampling so the report does
/// not depend on input order.
inline DiagnosticsReport diversity_report(const std::vector<Triplet>& triplets,
                                          const std::vector<Passage>& passages,
                                          const DiversityOptions& options = {}) {
  std::vector<QAPair> kept;
  for (const auto& t : triplets)
    if (survived(t)) kept.push_back(t.pair);
  if (kept.empty()) throw ValidationError("diversity_report: no surviving triplets");
  std::sort(kept.begin(), kept.end(), [](const QAPair& a, const QAPair& b) {
    return std::tie(a.question, a.answer) < std::tie(b.question, b.answer);
  });
  std::vector<std::string> questions, answers;
  for (const auto& p : kept) {
    questions.push_back(p.question);
    answers.push_back(p.answer);
  }

  DiagnosticsReport r;
  r.triplets = triplets.size();
  r.survivors = kept.size();
  if (questions.size() >= 2) {
    SelfBleuOptions sb;
    sb.sample_size = options.self_bleu_sample;
    sb.seed = options.seed;
    sb.workers = options.workers;
    r.self_bleu_sample = std::min(options.self_bleu_sample, questions.size());
    r.self_bleu_median = self_bleu(questions, options.lemmatizer, sb);
  }
  r.wh_ratios = wh_ratios(questions, options.lexicon, options.lemmatizer);
  r.lengths = length_stats(kept);
  r.top_lemmas_q = top_lemmas(questions, options.top_k, options.lemmatizer, options.lexicon.words);
  r.top_lemmas_a = top_lemmas(answers, options.top_k, options.lemmatizer, options.lexicon.words);
  r.per_category_retention = category_retention(triplets, passages, options.groups);
  return r;
}

}  // namespace qaforge
