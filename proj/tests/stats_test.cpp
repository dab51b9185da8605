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

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "qaforge/stats.hpp"

namespace qaforge {
namespace {

const WhLexicon kLex = WhLexicon::russian_default();

TEST(WhRatios, DirectCount) {
  std::vector<std::string> qs;
  for (int i = 0; i < 4; ++i) qs.push_back("Кто построил дом " + std::to_string(i) + "?");
  for (int i = 0; i < 6; ++i) qs.push_back("Где стоит дом " + std::to_string(i) + "?");
  const auto r = wh_ratios(qs, kLex);
  EXPECT_DOUBLE_EQ(r.at("кто"), 0.4);
  EXPECT_DOUBLE_EQ(r.at("где"), 0.6);
  EXPECT_DOUBLE_EQ(r.at("зачем"), 0.0);
  EXPECT_EQ(r.size(), 15u);
}

TEST(WhRatios, RepeatsCountOnce) {
  const auto r = wh_ratios({"Кто кто кто?", "Дом?"}, kLex);
  EXPECT_DOUBLE_EQ(r.at("кто"), 0.5);
}

TEST(WhRatios, InflectedFormsNeedLemmatizer) {
  TableLemmatizer lem;
  const auto r = wh_ratios({"Какие реки текут?"}, kLex, &lem);
  EXPECT_DOUBLE_EQ(r.at("какой"), 1.0);
}

TEST(WhRatios, EmptyIsError) { EXPECT_THROW(wh_ratios({}, kLex), ValidationError); }

TEST(WhRatios, KogdaOrderingAcrossCorpora) {
  // 12 of 100 versus 5 of 100.
  std::vector<std::string> generated, human;
  for (int i = 0; i < 100; ++i) {
    generated.push_back(i < 12 ? "Когда это было?" : "Что это?");
    human.push_back(i < 5 ? "Когда это было?" : "Что это?");
  }
  EXPECT_GT(wh_ratios(generated, kLex).at("когда"), wh_ratios(human, kLex).at("когда"));
}

TEST(LengthStatsTest, SinglePair) {
  const auto s = length_stats(std::vector<QAPair>{{"ab cd", "x", 0}});
  EXPECT_EQ(s.avg_q_chars, 5.0);
  EXPECT_EQ(s.avg_q_tokens, 2.0);
  EXPECT_EQ(s.avg_a_chars, 1.0);
  EXPECT_EQ(s.avg_a_tokens, 1.0);
}

TEST(LengthStatsTest, EmptyIsError) {
  EXPECT_THROW(length_stats(std::vector<QAPair>{}), ValidationError);
}

TEST(LengthStatsTest, ThreePairs) {
  const auto s = length_stats(std::vector<QAPair>{
      {"Кто?", "Он", 0}, {"Где дом?", "там", 1}, {"Год постройки дома?", "1997 г.", 2}});
  EXPECT_EQ(s.avg_q_chars, (4.0 + 8.0 + 19.0) / 3.0);
  EXPECT_EQ(s.avg_q_tokens, (1.0 + 2.0 + 3.0) / 3.0);
  EXPECT_EQ(s.avg_a_chars, (2.0 + 3.0 + 7.0) / 3.0);
  EXPECT_EQ(s.avg_a_tokens, (1.0 + 1.0 + 2.0) / 3.0);
  EXPECT_LE(s.avg_q_tokens, s.avg_q_chars);
}

TEST(TopLemmas, Examples) {
  const auto r = top_lemmas({"год год", "год"}, 5);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].first, "год");
  EXPECT_EQ(r[0].second, 3u);
  const auto tie = top_lemmas({"бета альфа"}, 5);
  ASSERT_EQ(tie.size(), 2u);
  EXPECT_EQ(tie[0].first, "альфа");
  EXPECT_TRUE(top_lemmas({"год"}, 0).empty());
}

TEST(TopLemmas, WhWordsExcludedByDefault) {
  const auto r = top_lemmas({"Кто кто год"}, 5);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].first, "год");
  EXPECT_EQ(top_lemmas({"Кто кто год"}, 5, nullptr, {}).front().first, "кто");
}

TEST(CategoryGroupsTest, Parse) {
  const auto g = parse_category_groups("# c\nhistory: Истори, войн\n\nsports: спорт\n");
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].name, "history");
  EXPECT_EQ(g[0].patterns, (std::vector<std::string>{"истори", "войн"}));
  EXPECT_THROW(parse_category_groups("nonsense"), ValidationError);
  EXPECT_EQ(default_category_groups().size(), 9u);
}

TEST(CategoryGroupsTest, BundledFileMatchesDefaults) {
  const auto file = load_category_groups(std::string(QAFORGE_TEST_DATA) + "/../../data/category_groups.conf");
  const auto& defaults = default_category_groups();
  ASSERT_EQ(file.size(), defaults.size());
  for (std::size_t i = 0; i < file.size(); ++i) {
    EXPECT_EQ(file[i].name, defaults[i].name);
    EXPECT_EQ(file[i].patterns, defaults[i].patterns);
  }
  EXPECT_THROW(load_category_groups("/nonexistent/groups.conf"), IoError);
}

std::vector<Triplet> verdicts(const std::string& pid, int total, int passed) {
  std::vector<Triplet> out;
  for (int i = 0; i < total; ++i) {
    FilterVerdict v;
    if (i >= passed) {
      v.passed = false;
      v.rejected_at = "dedup";
    }
    out.push_back(Triplet{pid, {"q" + std::to_string(i), "a", i % 3}, ModelTag::kStub, v});
  }
  return out;
}

TEST(CategoryRetention, Examples) {
  const std::vector<Passage> ps{{"h", "", "t", {"История России"}, 0, DomainTag::kWiki},
                                {"hs", "", "t", {"История спорта"}, 0, DomainTag::kWiki},
                                {"x", "", "t", {"Прочее"}, 0, DomainTag::kWiki}};
  auto ts = verdicts("h", 10, 3);
  auto r = category_retention(ts, ps);
  EXPECT_DOUBLE_EQ(r.at("history"), 0.3);
  EXPECT_FALSE(r.count("sports"));

  auto more = verdicts("hs", 10, 10);
  ts.insert(ts.end(), more.begin(), more.end());
  r = category_retention(ts, ps);
  EXPECT_DOUBLE_EQ(r.at("history"), 13.0 / 20.0);
  EXPECT_DOUBLE_EQ(r.at("sports"), 1.0);
}

TEST(CategoryRetention, UnfilteredIsOne) {
  const std::vector<Passage> ps{{"h", "", "t", {"История"}, 0, DomainTag::kWiki}};
  std::vector<Triplet> ts(4, Triplet{"h", {"q", "a", 0}, ModelTag::kStub, std::nullopt});
  EXPECT_DOUBLE_EQ(category_retention(ts, ps).at("history"), 1.0);
}

std::vector<Triplet> sample_corpus(std::size_t n) {
  std::vector<Triplet> ts;
  std::mt19937_64 rng(4);
  const char* w[] = {"Кто", "Где", "год", "дом", "река", "Когда", "мост", "город"};
  for (std::size_t i = 0; i < n; ++i) {
    std::string q = std::string(w[rng() % 8]) + " " + w[rng() % 8] + " " + w[rng() % 8] + "?";
    ts.push_back(Triplet{"p" + std::to_string(i % 7), {q, w[rng() % 8], 0}, ModelTag::kStub,
                         std::nullopt});
  }
  return ts;
}

TEST(DiversityReport, DeterministicAndPermutationInvariant) {
  const auto ts = sample_corpus(300);
  std::vector<Passage> ps;
  for (int i = 0; i < 7; ++i)
    ps.push_back({"p" + std::to_string(i), "", "t", {i % 2 ? "История" : "Футбол"}, 0,
                  DomainTag::kWiki});
  DiversityOptions o;
  o.seed = 17;
  o.self_bleu_sample = 100;
  const auto a = diversity_report(ts, ps, o).to_json();
  const auto b = diversity_report(ts, ps, o).to_json();
  EXPECT_EQ(a.dump(), b.dump());
  auto shuffled = ts;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(1));
  EXPECT_EQ(diversity_report(shuffled, ps, o).to_json().dump(), a.dump());
  o.workers = 4;
  EXPECT_EQ(diversity_report(ts, ps, o).to_json().dump(), a.dump());
  for (const auto& [k, v] : a["wh_ratios"].items()) {
    EXPECT_GE(v.get<double>(), 0.0);
    EXPECT_LE(v.get<double>(), 1.0);
  }
}

TEST(DiversityReport, EmptySurvivorsIsError) {
  auto ts = verdicts("h", 3, 0);
  EXPECT_THROW(diversity_report(ts, {}), ValidationError);
}

}  // namespace
}  // namespace qaforge
