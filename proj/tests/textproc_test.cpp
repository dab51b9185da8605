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

#include "qaforge/textproc.hpp"

#include <random>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace qaforge {
namespace {

std::vector<std::string> surfaces(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

class FailingLemmatizer final : public Lemmatizer {
 public:
  std::string name() const override { return "failing"; }
  std::vector<std::string> lemmatize(const std::vector<std::string>&) const override {
    throw ProviderError(ProviderError::Kind::kUnavailable, name(), "down");
  }
};

class StubRecognizer final : public EntityRecognizer {
 public:
  std::string name() const override { return "stub"; }
  std::vector<Entity> recognize(std::string_view text) const override {
    std::vector<Entity> out;
    const std::string needle = "Bee Train";
    if (auto pos = text.find(needle); pos != std::string_view::npos)
      out.push_back({needle, EntityKind::kOrganization, pos, pos + needle.size()});
    return out;
  }
};

TEST(TokenizeTest, SplitsOnWhitespaceAndPunctuation) {
  EXPECT_EQ(surfaces(tokenize("Кто основал Bee Train?")),
            (std::vector<std::string>{"Кто", "основал", "Bee", "Train"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(surfaces(tokenize("a-b c")), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(TokenizeTest, StressMarksStayInsideWords) {
  EXPECT_EQ(surfaces(tokenize("Ко́ити, 1997 г.")),
            (std::vector<std::string>{"Ко́ити", "1997", "г"}));
}

TEST(TokenizeTest, SpansReconstructSurfaces) {
  std::mt19937 rng(7);
  const std::vector<std::string> pieces = {"Кто", " ", "год", ",", "Bee", "-", "é",
                                           "1997", "?", "\n", "ёж", "«", "»"};
  for (int round = 0; round < 200; ++round) {
    std::string text;
    const int len = static_cast<int>(rng() % 12);
    for (int i = 0; i < len; ++i) text += pieces[rng() % pieces.size()];
    std::size_t last_end = 0;
    for (const auto& t : tokenize(text)) {
      ASSERT_LE(last_end, t.start);
      ASSERT_LT(t.start, t.end);
      EXPECT_EQ(text.substr(t.start, t.end - t.start), t.surface);
      last_end = t.end;
    }
  }
}

TEST(LemmatizeTest, FallbackLowercases) {
  auto tokens = tokenize("Коити");
  lemmatize(tokens, nullptr);
  EXPECT_EQ(tokens[0].lemma, "коити");
}

TEST(LemmatizeTest, ProviderTableIsUsed) {
  TableLemmatizer provider(LemmaTable{{"годы", "год"}});
  auto tokens = tokenize("Годы");
  lemmatize(tokens, &provider);
  EXPECT_EQ(tokens[0].lemma, "год");
}

TEST(LemmatizeTest, Idempotent) {
  TableLemmatizer provider(LemmaTable{{"годы", "год"}});
  auto once = tokenize("Годы шли, Какова цена");
  lemmatize(once, &provider);
  auto twice = once;
  lemmatize(twice, &provider);
  EXPECT_EQ(once, twice);
}

TEST(LemmatizeTest, ProviderFailureFallsBackOrPropagates) {
  FailingLemmatizer failing;
  auto tokens = tokenize("Годы");
  lemmatize(tokens, &failing, /*fallback=*/true);
  EXPECT_EQ(tokens[0].lemma, "годы");
  EXPECT_THROW(lemmatize(tokens, &failing, /*fallback=*/false), ProviderError);
  try {
    lemmatize(tokens, &failing, false);
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.role(), "failing");
  }
}

TEST(LevenshteinTest, Examples) {
  EXPECT_DOUBLE_EQ(levenshtein_similarity("abc", "abc"), 1.0);
  EXPECT_NEAR(levenshtein_similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(levenshtein_similarity("", "ab"), 0.0);
}

TEST(LevenshteinTest, CountsCodePointsNotBytes) {
  // One substitution in a 4-letter Cyrillic word.
  EXPECT_DOUBLE_EQ(levenshtein_similarity("кота", "кита"), 0.75);
}

TEST(LevenshteinTest, MatchesNaiveRecursionOnSmallStrings) {
  const auto all = oracle::all_sequences({"a", "b", "c"}, 6);
  std::vector<std::string> strings;
  for (const auto& w : all) {
    std::string s;
    for (const auto& c : w) s += c;
    strings.push_back(s);
  }
  // Every pair up to length 4, plus a strided sample of the longer ones.
  for (std::size_t i = 0; i < strings.size(); ++i) {
    for (std::size_t j = 0; j < strings.size(); ++j) {
      const bool small = strings[i].size() <= 4 && strings[j].size() <= 4;
      if (!small && (i * 131 + j) % 97 != 0) continue;
      ASSERT_NEAR(levenshtein_similarity(strings[i], strings[j]),
                  oracle::naive_similarity(strings[i], strings[j]), 1e-12)
          << strings[i] << " vs " << strings[j];
    }
  }
}

TEST(LevenshteinTest, MetricProperties) {
  const auto all = oracle::all_sequences({"a", "b", "c"}, 3);
  std::vector<std::vector<std::string>> seqs(all.begin(), all.end());
  for (const auto& x : seqs) {
    for (const auto& y : seqs) {
      const std::size_t dxy = edit_distance<std::string>(x, y);
      EXPECT_EQ(dxy, edit_distance<std::string>(y, x));
      for (const auto& z : seqs) {
        if ((x.size() + y.size() + z.size()) % 3 != 0) continue;  // thin the cube
        EXPECT_LE(dxy, edit_distance<std::string>(x, z) + edit_distance<std::string>(z, y));
      }
    }
  }
}

TEST(LevenshteinTest, TokenLevel) {
  EXPECT_DOUBLE_EQ(levenshtein_similarity_tokens("кто основал студию", "кто создал студию"),
                   1.0 - 1.0 / 3.0);
}

TEST(InterrogativesTest, Examples) {
  const auto lexicon = WhLexicon::russian_default();
  TableLemmatizer lemmatizer;
  EXPECT_EQ(lexicon.words.size(), 15u);
  EXPECT_EQ(count_interrogatives("Кто основал студию?", lexicon, &lemmatizer), 1u);
  EXPECT_EQ(count_interrogatives("Кто и когда основал?", lexicon, &lemmatizer), 2u);
  EXPECT_EQ(count_interrogatives("Студия основана в 1997.", lexicon, &lemmatizer), 0u);
  EXPECT_EQ(count_interrogatives("Какова способность гриба?", lexicon, &lemmatizer), 1u);
}

TEST(InterrogativesTest, CaseInvariant) {
  const auto lexicon = WhLexicon::russian_default();
  TableLemmatizer lemmatizer;
  for (const std::string q : {"Кто и КОГДА основал?", "сколько лет Какой?",
                              "ГДЕ находится Москва"}) {
    EXPECT_EQ(count_interrogatives(q, lexicon, &lemmatizer),
              count_interrogatives(utf8::to_lower(q), lexicon, &lemmatizer))
        << q;
  }
}

TEST(EntitiesTest, CapitalizationFallback) {
  const auto entities = extract_entities("Коити Масимо родился", nullptr);
  ASSERT_EQ(entities.size(), 1u);
  EXPECT_EQ(entities[0].text, "Коити Масимо");
  EXPECT_EQ(entities[0].kind, EntityKind::kOther);
  EXPECT_TRUE(extract_entities("", nullptr).empty());
  EXPECT_THROW(extract_entities("Коити Масимо", nullptr, /*fallback=*/false), ProviderError);
}

TEST(EntitiesTest, ProviderStub) {
  StubRecognizer stub;
  const std::string text = "основатель студии Bee Train";
  const auto entities = extract_entities(text, &stub);
  ASSERT_EQ(entities.size(), 1u);
  EXPECT_EQ(entities[0].kind, EntityKind::kOrganization);
  EXPECT_EQ(text.substr(entities[0].start, entities[0].end - entities[0].start),
            entities[0].text);
}

TEST(NgramsTest, Examples) {
  using W = std::vector<std::string>;
  const auto bigrams = ngrams(W{"a", "b", "c"}, 2);
  EXPECT_EQ(bigrams.size(), 2u);
  EXPECT_EQ(bigrams.at(W{"a", "b"}), 1u);
  EXPECT_EQ(bigrams.at(W{"b", "c"}), 1u);
  EXPECT_TRUE(ngrams(W{"a"}, 2).empty());
  EXPECT_EQ(ngrams(W{"a", "a", "a"}, 1).at(W{"a"}), 3u);
  EXPECT_THROW(ngrams(W{"a"}, 0), ValidationError);
}

TEST(Utf8Test, TrimAndLower) {
  EXPECT_EQ(utf8::trim("   Коити\t "), "Коити");
  EXPECT_EQ(utf8::to_lower("ЁЖИК Bee"), "ёжик bee");
  EXPECT_EQ(utf8::length("ёж"), 2u);
}

}  // namespace
}  // namespace qaforge
