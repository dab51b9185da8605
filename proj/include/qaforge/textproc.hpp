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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qaforge/error.hpp"

namespace qaforge {
namespace utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

/// Decodes one code point starting at `pos` and advances `pos`. Invalid
/// sequences yield U+FFFD and consume a single byte.
inline char32_t decode_next(std::string_view s, std::size_t& pos) {
  const auto byte = [&](std::size_t i) {
    return static_cast<unsigned char>(s[i]);
  };
  const unsigned char lead = byte(pos);
  if (lead < 0x80) {
    ++pos;
    return lead;
  }
  int extra = 0;
  char32_t cp = 0;
  if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    ++pos;
    return kReplacement;
  }
  if (pos + extra >= s.size()) {
    ++pos;
    return kReplacement;
  }
  for (int i = 1; i <= extra; ++i) {
    const unsigned char c = byte(pos + i);
    if ((c & 0xC0) != 0x80) {
      ++pos;
      return kReplacement;
    }
    cp = (cp << 6) | (c & 0x3F);
  }
  pos += extra + 1;
  return cp;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) out.push_back(decode_next(s, pos));
  return out;
}

inline std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append(out, cp);
  return out;
}

/// Number of code points.
inline std::size_t length(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < s.size();) {
    decode_next(s, pos);
    ++n;
  }
  return n;
}

inline bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

/// Letters of the scripts a Russian Wikipedia summary actually contains:
/// Latin, Greek, Cyrillic, kana/CJK, Hangul. Combining marks (stress
/// accents) count as word characters so they never split a word.
inline bool is_letter(char32_t c) {
  if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z')) return true;
  if (c < 0xC0) return false;
  if (c <= 0xFF) return c != 0xD7 && c != 0xF7;
  return (c <= 0x24F) || (c >= 0x300 && c <= 0x36F) ||
         (c >= 0x370 && c <= 0x3FF && c != 0x37E && c != 0x387) ||
         (c >= 0x400 && c <= 0x52F && !(c >= 0x482 && c <= 0x489)) ||
         (c >= 0x3040 && c <= 0x30FF && c != 0x30FB) ||
         (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0xAC00 && c <= 0xD7AF);
}

inline bool is_word_char(char32_t c) { return is_digit(c) || is_letter(c); }

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' ||
         c == U'\f' || c == 0xA0 || (c >= 0x2000 && c <= 0x200B) ||
         c == 0x202F || c == 0x205F || c == 0x3000;
}

inline bool is_upper(char32_t c) {
  return (c >= U'A' && c <= U'Z') || (c >= 0xC0 && c <= 0xDE && c != 0xD7) ||
         (c >= 0x391 && c <= 0x3A9) || (c >= 0x400 && c <= 0x42F);
}

inline char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c >= 0x100 && c <= 0x137 && c % 2 == 0) return c + 1;
  if (c >= 0x391 && c <= 0x3A9) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (((c >= 0x460 && c <= 0x481) || (c >= 0x48A && c <= 0x4BF)) && c % 2 == 0)
    return c + 1;
  return c;
}

inline std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();)
    append(out, to_lower(decode_next(s, pos)));
  return out;
}

/// Trims ASCII and Unicode whitespace from both ends.
inline std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size()) {
    std::size_t next = begin;
    if (!is_space(decode_next(s, next))) break;
    begin = next;
  }
  std::size_t end = begin;
  for (std::size_t pos = begin; pos < s.size();) {
    const char32_t c = decode_next(s, pos);
    if (!is_space(c)) end = pos;
  }
  return s.substr(begin, end - begin);
}

}  // namespace utf8

// ---------------------------------------------------------------------------
// Tokens and entities

struct Token {
  std::string surface;
  std::string lemma;
  // Byte offsets into the source string, half-open.
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

enum class EntityKind { kPerson, kLocation, kOrganization, kOther };

inline std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::kPerson: return "person";
    case EntityKind::kLocation: return "location";
    case EntityKind::kOrganization: return "organization";
    case EntityKind::kOther: return "other";
  }
  return "other";
}

inline EntityKind entity_kind_from_string(std::string_view s) {
  if (s == "person" || s == "PER") return EntityKind::kPerson;
  if (s == "location" || s == "LOC") return EntityKind::kLocation;
  if (s == "organization" || s == "ORG") return EntityKind::kOrganization;
  return EntityKind::kOther;
}

struct Entity {
  std::string text;
  EntityKind kind = EntityKind::kOther;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Entity&) const = default;
};

/// Splits `text` into maximal runs of letters and digits. Everything else
/// (whitespace, punctuation, symbols) separates tokens. Lemmas are left
/// empty until lemmatize() fills them.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  std::optional<std::size_t> run_start;
  while (pos < text.size()) {
    const std::size_t at = pos;
    const char32_t c = utf8::decode_next(text, pos);
    if (utf8::is_word_char(c)) {
      if (!run_start) run_start = at;
    } else if (run_start) {
      tokens.push_back({std::string(text.substr(*run_start, at - *run_start)),
                        {}, *run_start, at});
      run_start.reset();
    }
  }
  if (run_start) {
    tokens.push_back({std::string(text.substr(*run_start)), {}, *run_start,
                      text.size()});
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Provider roles. Implementations must be safe to call from several worker
// threads at once.

class Lemmatizer {
 public:
  virtual ~Lemmatizer() = default;
  virtual std::string name() const = 0;
  /// One lemma per input surface, same order. May throw ProviderError.
  virtual std::vector<std::string> lemmatize(
      const std::vector<std::string>& surfaces) const = 0;
};

class EntityRecognizer {
 public:
  virtual ~EntityRecognizer() = default;
  virtual std::string name() const = 0;
  /// Entities with byte spans into `text`. May throw ProviderError.
  virtual std::vector<Entity> recognize(std::string_view text) const = 0;
};

/// Inflected forms of the interrogative words, mapped to their dictionary
/// form. Used by the offline lemmatizer so that "Какова" counts as "каков".
inline const std::unordered_map<std::string, std::string>& wh_form_table() {
  static const std::unordered_map<std::string, std::string> table = [] {
    std::unordered_map<std::string, std::string> t;
    const auto add = [&t](const char* lemma,
                          std::initializer_list<const char*> forms) {
      for (const char* f : forms) t.emplace(f, lemma);
    };
    add("кто", {"кого", "кому", "ком"});
    add("что", {"чего", "чему", "чём"});
    add("какой", {"какая", "какое", "какие", "какого", "какому", "каким",
                  "каком", "какую", "каких", "какими"});
    add("который", {"которая", "которое", "которые", "которого", "которому",
                    "которым", "котором", "которую", "которых", "которыми",
                    "которой"});
    add("чей", {"чья", "чьё", "чье", "чьи", "чьего", "чьему", "чьим", "чьём",
                "чьем", "чью", "чьих", "чьими", "чьей"});
    add("каков", {"какова", "каково", "каковы"});
    add("каковой", {"каковая", "каковое", "каковые", "каковую", "каковым",
                    "каковых", "каковой", "каковом", "каковому"});
    add("сколько", {"скольких", "скольким", "сколькими"});
    return t;
  }();
  return table;
}

/// Offline lemmatizer: lowercases the surface and looks it up in a small
/// table. Unknown words lemmatize to their lowercase form.
using LemmaTable = std::unordered_map<std::string, std::string>;

class TableLemmatizer final : public Lemmatizer {
 public:
  TableLemmatizer() : TableLemmatizer(LemmaTable{}) {}
  explicit TableLemmatizer(LemmaTable table, bool with_wh_forms = true)
      : table_(std::move(table)) {
    if (with_wh_forms) {
      for (const auto& [form, lemma] : wh_form_table()) table_.emplace(form, lemma);
    }
  }

  std::string name() const override { return "table"; }

  std::vector<std::string> lemmatize(
      const std::vector<std::string>& surfaces) const override {
    std::vector<std::string> out;
    out.reserve(surfaces.size());
    for (const auto& s : surfaces) {
      std::string lower = utf8::to_lower(s);
      auto it = table_.find(lower);
      out.push_back(it == table_.end() ? std::move(lower) : it->second);
    }
    return out;
  }

 private:
  std::unordered_map<std::string, std::string> table_;
};

/// Fills token lemmas from `provider`. Lemmas are always lowercased; an
/// empty provider lemma falls back to the lowercased surface. With
/// `fallback` set, a provider failure degrades to lowercase lemmas instead
/// of propagating.
inline void lemmatize(std::vector<Token>& tokens, const Lemmatizer* provider,
                      bool fallback = true) {
  std::vector<std::string> lemmas;
  if (provider != nullptr && !tokens.empty()) {
    std::vector<std::string> surfaces;
    surfaces.reserve(tokens.size());
    for (const auto& t : tokens) surfaces.push_back(t.surface);
    try {
      lemmas = provider->lemmatize(surfaces);
    } catch (const ProviderError&) {
      if (!fallback) throw;
      lemmas.clear();
    }
    if (!lemmas.empty() && lemmas.size() != tokens.size()) {
      if (!fallback) {
        throw ProviderError(ProviderError::Kind::kBadResponse, provider->name(),
                            "lemma count does not match token count");
      }
      lemmas.clear();
    }
  } else if (provider == nullptr && !fallback) {
    throw ProviderError(ProviderError::Kind::kUnavailable, "lemmatizer",
                        "no provider configured and fallback disabled");
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string lemma = i < lemmas.size() ? utf8::to_lower(lemmas[i]) : std::string();
    tokens[i].lemma = lemma.empty() ? utf8::to_lower(tokens[i].surface) : std::move(lemma);
  }
}

/// Tokenize + lemmatize, returning the lemma sequence only.
inline std::vector<std::string> lemmas_of(std::string_view text,
                                          const Lemmatizer* provider,
                                          bool fallback = true) {
  auto tokens = tokenize(text);
  lemmatize(tokens, provider, fallback);
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (auto& t : tokens) out.push_back(std::move(t.lemma));
  return out;
}

// ---------------------------------------------------------------------------
// Interrogatives

struct WhLexicon {
  std::set<std::string> words;

  /// kto, chto, kakoj, chej, gde, kotoryj, otkuda, skol'ko, kakovoj, kakov,
  /// zachem, kogda, pochemu, chem, kak.
  static WhLexicon russian_default() {
    return {{"кто", "что", "какой", "чей", "где", "который", "откуда",
             "сколько", "каковой", "каков", "зачем", "когда", "почему", "чем",
             "как"}};
  }

  bool contains(std::string_view lemma) const {
    return words.find(std::string(lemma)) != words.end();
  }
};

/// Number of question tokens whose lemma is an interrogative word. Repeats
/// count each time.
inline std::size_t count_interrogatives(std::string_view question,
                                        const WhLexicon& lexicon,
                                        const Lemmatizer* provider,
                                        bool fallback = true) {
  std::size_t n = 0;
  for (const auto& lemma : lemmas_of(question, provider, fallback)) {
    if (lexicon.contains(lemma)) ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Named entities

/// Offline recognizer: a run of two or more adjacent capitalized tokens
/// separated only by whitespace is one entity of kind `other`. Single
/// capitalized words are skipped, which keeps sentence-initial words out.
class CapitalizationRecognizer final : public EntityRecognizer {
 public:
  std::string name() const override { return "capitalization"; }

  std::vector<Entity> recognize(std::string_view text) const override {
    const auto tokens = tokenize(text);
    std::vector<Entity> out;
    std::size_t i = 0;
    while (i < tokens.size()) {
      if (!capitalized(tokens[i])) {
        ++i;
        continue;
      }
      std::size_t j = i + 1;
      while (j < tokens.size() && capitalized(tokens[j]) &&
             only_spaces(text.substr(tokens[j - 1].end,
                                     tokens[j].start - tokens[j - 1].end))) {
        ++j;
      }
      if (j - i >= 2) {
        const std::size_t start = tokens[i].start;
        const std::size_t end = tokens[j - 1].end;
        out.push_back({std::string(text.substr(start, end - start)),
                       EntityKind::kOther, start, end});
      }
      i = j;
    }
    return out;
  }

 private:
  static bool capitalized(const Token& t) {
    std::size_t pos = 0;
    return utf8::is_upper(utf8::decode_next(t.surface, pos));
  }
  static bool only_spaces(std::string_view gap) {
    if (gap.empty()) return false;
    for (std::size_t pos = 0; pos < gap.size();) {
      if (!utf8::is_space(utf8::decode_next(gap, pos))) return false;
    }
    return true;
  }
};

/// Runs `provider`, falling back to the capitalization heuristic on
/// failure when `fallback` is set. Result is sorted by span.
inline std::vector<Entity> extract_entities(std::string_view text,
                                            const EntityRecognizer* provider,
                                            bool fallback = true) {
  static const CapitalizationRecognizer heuristic;
  std::vector<Entity> entities;
  if (text.empty()) return entities;
  if (provider == nullptr) {
    if (!fallback) {
      throw ProviderError(ProviderError::Kind::kUnavailable, "ner",
                          "no provider configured and fallback disabled");
    }
    entities = heuristic.recognize(text);
  } else {
    try {
      entities = provider->recognize(text);
    } catch (const ProviderError&) {
      if (!fallback) throw;
      entities = heuristic.recognize(text);
    }
  }
  std::stable_sort(entities.begin(), entities.end(),
                   [](const Entity& a, const Entity& b) {
                     return std::pair(a.start, a.end) < std::pair(b.start, b.end);
                   });
  return entities;
}

// ---------------------------------------------------------------------------
// Edit distance

/// Unit-cost Levenshtein distance over arbitrary element sequences.
template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

template <typename T>
double similarity_ratio(std::span<const T> a, std::span<const T> b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(a, b)) /
                   static_cast<double>(longest);
}

/// 1 - dist/max(|a|,|b|) over Unicode code points. Two empty strings are
/// identical and score 1.
inline double levenshtein_similarity(std::string_view a, std::string_view b) {
  const std::u32string ca = utf8::decode(a);
  const std::u32string cb = utf8::decode(b);
  return similarity_ratio<char32_t>(ca, cb);
}

/// Same ratio computed over token surfaces instead of characters.
inline double levenshtein_similarity_tokens(std::string_view a, std::string_view b) {
  std::vector<std::string> ta, tb;
  for (auto& t : tokenize(a)) ta.push_back(std::move(t.surface));
  for (auto& t : tokenize(b)) tb.push_back(std::move(t.surface));
  return similarity_ratio<std::string>(ta, tb);
}

// ---------------------------------------------------------------------------
// N-grams

template <typename T>
using NgramCounts = std::map<std::vector<T>, std::size_t>;

/// All contiguous windows of length `n`, with multiplicity.
template <typename T>
NgramCounts<T> ngrams(std::span<const T> tokens, std::size_t n) {
  if (n == 0) throw ValidationError("ngrams: n must be at least 1");
  NgramCounts<T> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<T>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return counts;
}

inline NgramCounts<std::string> ngrams(const std::vector<std::string>& tokens,
                                       std::size_t n) {
  return ngrams<std::string>(std::span<const std::string>(tokens), n);
}

}  // namespace qaforge
