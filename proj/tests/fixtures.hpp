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

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qaforge/corpus_model.hpp"
#include "qaforge/filter.hpp"
#include "qaforge/sampling.hpp"
#include "qaforge/textproc.hpp"

namespace qaforge::fixture {

/// Tags every occurrence of the listed strings.
class TableRecognizer final : public EntityRecognizer {
 public:
  explicit TableRecognizer(std::map<std::string, EntityKind> table) : table_(std::move(table)) {}
  std::string name() const override { return "table-ner"; }
  std::vector<Entity> recognize(std::string_view text) const override {
    std::vector<Entity> out;
    for (const auto& [s, kind] : table_) {
      for (std::size_t at = text.find(s); at != std::string_view::npos; at = text.find(s, at + 1))
        out.push_back({s, kind, at, at + s.size()});
    }
    return out;
  }

 private:
  std::map<std::string, EntityKind> table_;
};

struct Cascade {
  std::vector<Passage> passages;
  std::vector<Triplet> triplets;
  std::map<TableReader::Key, ReaderAnswer> reader;
  std::set<std::pair<std::string, int>> survivors;
  std::map<std::string, std::size_t> per_stage;
  std::size_t unresolved = 0;
};

/// Ten triplets per passage with hand-derived outcomes under the standard
/// plan, the capitalization NER and a table reader:
///   0 survives; 1 two interrogatives; 2 overlap 2/3 < 0.7; 3 survives
///   (entity present); 4 entity absent from the passage; 5 copy of 0;
///   6 near copy of 0 (question similarity > 0.7, same answer);
///   7 reader has no answer (unresolved); 8 survives; 9 answer entity absent.
inline Cascade cascade(std::size_t passages) {
  static const char* studios[] = {"Bee Train", "Sunrise", "Madhouse", "Bones", "Gainax",
                                  "Trigger", "Shaft", "Manglobe"};
  static const char* founders[] = {"Коити Масимо", "Хадзимэ Ятатэ", "Масао Маруяма",
                                   "Масахико Минами", "Хироюки Ямага", "Хироюки Имаиси"};
  static const char* cities[] = {"Токио", "Осаке", "Киото", "Нагое"};
  static const char* outsiders[] = {"Мэйдзи Сэйки", "Studio Ghibli", "Тайсё Ниси"};
  Cascade c;
  for (std::size_t i = 0; i < passages; ++i) {
    const std::string studio = studios[i % 8];
    const std::string founder = founders[i % 6];
    const std::string city = cities[i % 4];
    const std::string year = std::to_string(1960 + static_cast<int>(i));
    Passage p;
    p.id = "c" + std::to_string(1000 + i);
    p.text = "Студия " + studio + " основана в " + year + " году в городе " + city + ". " +
             founder + " является основателем студии.";
    p.batch = static_cast<int>(i % 20);
    p.categories = {"Аниме-студии"};
    c.passages.push_back(p);

    const std::string missing_entity = outsiders[i % 3];
    const std::vector<std::pair<std::string, std::string>> qa = {
        {"Кто является основателем студии?", founder},
        {"Кто и когда основал студию?", founder},
        {"Когда основана студия?", "в " + year + " году"},
        {"Когда основана студия " + studio + "?", year},
        {"Кто основал студию Studio Ghibli?", founder},
        {"Кто является основателем студии?", founder},
        {"Кто является основателем студии " + studio + "?", founder},
        {"Откуда пришёл основатель?", "из " + city},
        {"Где находится студия?", "в " + city},
        {"Что создал основатель?", missing_entity == "Studio Ghibli" ? "Тайсё Ниси" : missing_entity},
    };
    const std::vector<std::string> gold = {founder,  founder, year + " году", year, founder,
                                           founder,  founder, "",             "в " + city,
                                           qa[9].second};
    for (int k = 0; k < 10; ++k) {
      const auto& [q, a] = qa[static_cast<std::size_t>(k)];
      c.triplets.push_back(Triplet{p.id, QAPair{q, a, k}, ModelTag::kStub, std::nullopt});
      if (k != 7) c.reader[{p.text, q}] = ReaderAnswer{gold[static_cast<std::size_t>(k)], 0.995};
    }
    for (int k : {0, 3, 8}) c.survivors.insert({p.id, k});
  }
  c.per_stage = {{"interrogative", passages},
                 {"gold_agreement", passages},
                 {"entity_consistency", 2 * passages},
                 {"dedup", 2 * passages}};
  c.unresolved = passages;
  return c;
}

/// Random triplets over a small vocabulary, for property tests.
struct RandomCorpus {
  std::vector<Passage> passages;
  std::vector<Triplet> triplets;
  std::map<TableReader::Key, ReaderAnswer> reader;
};

inline RandomCorpus random_corpus(std::size_t passages, std::size_t triplets_per_passage,
                                  std::uint64_t seed) {
  static const std::vector<std::string> vocab = {
      "студия", "город",  "год",   "река",  "Москва", "Казань", "Петров", "Иван",
      "основал", "был",   "музей", "Волга", "берег",  "1997",   "мост",   "Анна"};
  static const std::vector<std::string> wh = {"Кто", "Когда", "Где", "Что", "Какой", "Сколько"};
  std::mt19937_64 rng(seed);
  const auto word = [&] { return vocab[uniform_below(rng, vocab.size())]; };
  const auto words = [&](std::size_t lo, std::size_t hi) {
    const std::size_t n = lo + uniform_below(rng, hi - lo + 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + word();
    return s;
  };
  RandomCorpus c;
  for (std::size_t i = 0; i < passages; ++i) {
    Passage p;
    p.id = "r" + std::to_string(100000 + i);
    p.text = words(12, 30) + ". " + words(8, 20) + ".";
    p.batch = static_cast<int>(i % 20);
    c.passages.push_back(p);
    for (std::size_t k = 0; k < triplets_per_passage; ++k) {
      std::string q = wh[uniform_below(rng, wh.size())] + " " + words(1, 4);
      if (uniform_below(rng, 4) == 0) q += " " + wh[uniform_below(rng, wh.size())];
      q += "?";
      std::string a = words(1, 3);
      // Encourage duplicates within a group.
      if (k > 0 && uniform_below(rng, 5) == 0) {
        const Triplet& prev = c.triplets[c.triplets.size() - 1 - uniform_below(rng, k)];
        q = prev.pair.question;
        if (uniform_below(rng, 2)) a = prev.pair.answer;
      }
      c.triplets.push_back(Triplet{p.id, QAPair{q, a, static_cast<int>(k)}, ModelTag::kStub,
                                   std::nullopt});
      if (uniform_below(rng, 12) == 0) continue;  // reader has no answer
      std::string gold = uniform_below(rng, 3) == 0 ? a : words(1, 3);
      if (uniform_below(rng, 3) == 0) gold = a + " " + word();
      // Half the scores clear the 0.99 reader bar.
      const double score = uniform_below(rng, 2)
                               ? 0.99 + static_cast<double>(uniform_below(rng, 11)) / 1000.0
                               : static_cast<double>(uniform_below(rng, 1001)) / 1000.0;
      c.reader[{p.text, q}] = ReaderAnswer{gold, score};
    }
  }
  return c;
}

inline std::set<std::pair<std::string, int>> survivor_set(const std::vector<Triplet>& ts) {
  std::set<std::pair<std::string, int>> out;
  for (const auto& t : ts)
    if (t.verdict && t.verdict->passed) out.insert({t.passage_id, t.pair.gen_index});
  return out;
}

}  // namespace qaforge::fixture
