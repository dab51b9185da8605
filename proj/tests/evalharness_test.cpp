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
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "qaforge/evalharness.hpp"

namespace qaforge {
namespace {

std::vector<SquadItem> dataset(std::size_t n, const std::string& prefix = "d") {
  std::vector<SquadItem> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({prefix + std::to_string(i), "Контекст " + std::to_string(i),
                   "Вопрос " + std::to_string(i) + "?", {"ответ " + std::to_string(i)}});
  return out;
}

// Fails the first train call, then behaves like the oracle.
class FlakyTrainer final : public Trainer {
 public:
  std::string name() const override { return "flaky"; }
  std::string train(const std::vector<SquadItem>& s, const json& p,
                    const std::optional<std::string>& base) override {
    if (calls_++ == 0) throw ProviderError(ProviderError::Kind::kUnavailable, "trainer", "down");
    return oracle_.train(s, p, base);
  }
  std::vector<std::string> predict(const std::string& h,
                                   const std::vector<SquadItem>& items) override {
    return oracle_.predict(h, items);
  }

 private:
  int calls_ = 0;
  OracleTrainer oracle_;
};

TEST(DrawSamples, FullSizeIsPermutation) {
  const auto s = draw_samples(50, 50, 1, 3);
  auto sorted = s[0];
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(DrawSamples, DeterministicAndSeededPerReplica) {
  EXPECT_EQ(draw_samples(1000, 10, 2, 5), draw_samples(1000, 10, 2, 5));
  const auto s = draw_samples(1000, 10, 2, 5);
  EXPECT_NE(s[0], s[1]);
  EXPECT_EQ(s[1], draw_samples(1000, 10, 1, 6)[0]);
  for (const auto& r : s) EXPECT_EQ(std::set<std::size_t>(r.begin(), r.end()).size(), 10u);
}

TEST(DrawSamples, TooLarge) { EXPECT_THROW(draw_samples(5, 6, 1, 0), ValidationError); }

TEST(ScorePredictionFile, Examples) {
  const std::map<std::string, std::vector<std::string>> gold{
      {"a", {"Коити Масимо"}}, {"b", {"1997"}}, {"c", {"Токио"}}, {"d", {"студия"}}};
  std::map<std::string, std::string> pred{
      {"a", "Коити Масимо"}, {"b", "1997"}, {"c", "Токио"}, {"d", "студия"}};
  auto r = score_prediction_file(pred, gold);
  EXPECT_DOUBLE_EQ(r.em, 100.0);
  EXPECT_DOUBLE_EQ(r.f1, 100.0);
  pred["c"] = "";
  pred["d"] = "";
  EXPECT_DOUBLE_EQ(score_prediction_file(pred, gold).em, 50.0);
  pred["zzz"] = "extra";
  pred.erase("a");
  r = score_prediction_file(pred, gold);
  EXPECT_EQ(r.extra, 1u);
  EXPECT_EQ(r.missing, 1u);
  EXPECT_DOUBLE_EQ(r.em, 25.0);
}

TEST(ScorePredictionFile, SelfAsGold) {
  const auto items = dataset(20);
  std::map<std::string, std::string> pred;
  for (const auto& i : items) pred[i.id] = i.answers[0];
  EXPECT_DOUBLE_EQ(score_prediction_file(pred, gold_map(items)).em, 100.0);
}

TEST(RunExperiment, OracleScoresPerfectEverywhere) {
  ExperimentPlan plan;
  plan.sample_sizes = {20, 40};
  plan.replicas_per_size = 2;
  OracleTrainer trainer;
  const EvalSets sets{dataset(15, "dev"), dataset(15, "test")};
  const auto r = run_experiment(plan, dataset(100), trainer, sets);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.cells.size(), 2u);
    EXPECT_DOUBLE_EQ(*row.mean(&EvalCell::dev, &ScoreResult::em), 100.0);
    EXPECT_DOUBLE_EQ(*row.mean(&EvalCell::test, &ScoreResult::f1), 100.0);
  }
  EXPECT_NE(r.to_table().find("EM dev"), std::string::npos);
}

TEST(RunExperiment, EmptyAnswersScoreZero) {
  ExperimentPlan plan;
  plan.sample_sizes = {10};
  EmptyTrainer trainer;
  const auto r = run_experiment(plan, dataset(30), trainer, {dataset(5, "dev"), {}});
  EXPECT_DOUBLE_EQ(*r.rows[0].mean(&EvalCell::dev, &ScoreResult::em), 0.0);
  EXPECT_DOUBLE_EQ(*r.rows[0].mean(&EvalCell::dev, &ScoreResult::f1), 0.0);
  EXPECT_FALSE(r.rows[0].mean(&EvalCell::test, &ScoreResult::em).has_value());
}

TEST(RunExperiment, FailingCellDoesNotStopGrid) {
  ExperimentPlan plan;
  plan.sample_sizes = {10};
  plan.replicas_per_size = 3;
  FlakyTrainer trainer;
  const auto r = run_experiment(plan, dataset(30), trainer, {dataset(5, "dev"), {}});
  ASSERT_EQ(r.rows[0].cells.size(), 3u);
  EXPECT_TRUE(r.rows[0].cells[0].error.has_value());
  EXPECT_DOUBLE_EQ(*r.rows[0].mean(&EvalCell::dev, &ScoreResult::em), 100.0);
  EXPECT_TRUE(r.to_json()["rows"][0]["cells"][0]["error"].is_string());
}

TEST(RunExperiment, AverageEqualsReplicaMean) {
  // Oracle on dev, empty on test: replica means are exact.
  ExperimentPlan plan;
  plan.sample_sizes = {10};
  plan.replicas_per_size = 2;
  OracleTrainer trainer;
  auto dev = dataset(3, "dev");
  dev[0].answers = {"совсем другое"};
  const auto r = run_experiment(plan, dataset(30), trainer, {dev, {}});
  const auto& cells = r.rows[0].cells;
  const double mean = (cells[0].dev->em + cells[1].dev->em) / 2.0;
  EXPECT_EQ(*r.rows[0].mean(&EvalCell::dev, &ScoreResult::em), mean);
}

TEST(RunExperiment, SequentialNeedsContinuation) {
  ExperimentPlan plan;
  plan.kind = ExperimentKind::kSequentialFinetune;
  plan.sample_sizes = {10};
  OracleTrainer trainer;
  EXPECT_THROW(run_experiment(plan, dataset(30), trainer, {}), ValidationError);
  const auto r = run_experiment(plan, dataset(30), trainer, {dataset(4, "dev"), {}}, dataset(5, "sq"));
  EXPECT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[2].label, "10 + 3 ep");
}

TEST(FoldSplits, DisjointAndExhaustive) {
  std::vector<std::size_t> sample(110);
  for (std::size_t i = 0; i < sample.size(); ++i) sample[i] = 1000 + i * 3;
  const auto folds = fold_splits(sample, 5, 10);
  ASSERT_EQ(folds.size(), 5u);
  std::set<std::size_t> all_dev;
  for (const auto& f : folds) {
    EXPECT_EQ(f.dev.size(), 10u);
    EXPECT_EQ(f.train.size(), 100u);
    std::set<std::size_t> dev(f.dev.begin(), f.dev.end()), train(f.train.begin(), f.train.end());
    for (auto d : dev) EXPECT_FALSE(train.count(d));
    std::set<std::size_t> both = dev;
    both.insert(train.begin(), train.end());
    EXPECT_EQ(both, std::set<std::size_t>(sample.begin(), sample.end()));
    for (auto d : dev) EXPECT_TRUE(all_dev.insert(d).second);
  }
}

TEST(ExperimentPlanTest, DefaultsAndValidation) {
  ExperimentPlan p;
  EXPECT_EQ(p.sample_sizes, (std::vector<std::size_t>{50000, 100000, 300000}));
  EXPECT_EQ(p.replicas_per_size, 2u);
  EXPECT_EQ(p.exp3_sample_size(), 110000u);
  EXPECT_EQ(p.trainer_params["epochs"], 3);
  EXPECT_DOUBLE_EQ(p.trainer_params["learning_rate"].get<double>(), 2e-5);
  EXPECT_DOUBLE_EQ(p.trainer_params["weight_decay"].get<double>(), 0.01);
  EXPECT_THROW(p.validate(1000), ValidationError);
  p.kind = ExperimentKind::kOwnDevFolds;
  p.fold_dev_size = 30;
  p.fold_train_size = 100;
  EXPECT_THROW(p.validate(1000), ValidationError);  // 5 * 30 > 130
  const auto q = ExperimentPlan::from_json(json{{"kind", "exp3"}, {"folds", 2}});
  EXPECT_EQ(q.kind, ExperimentKind::kOwnDevFolds);
  EXPECT_EQ(q.folds, 2u);
}

TEST(LoadSquad, JsonAndJsonl) {
  const auto dir = std::filesystem::temp_directory_path() / "qaforge_squad";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "a.json");
    f << R"({"data":[{"title":"t","paragraphs":[{"context":"ctx","qas":[{"id":"1","question":"q?","answers":[{"text":"a","answer_start":0}]}]}]}]})";
  }
  {
    std::ofstream f(dir / "b.jsonl");
    f << R"({"id":"x","context":"c","question":"q","answers":["a","b"]})" << "\n";
  }
  const auto a = load_squad((dir / "a.json").string());
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].context, "ctx");
  EXPECT_EQ(a[0].answers, std::vector<std::string>{"a"});
  const auto b = load_squad((dir / "b.jsonl").string());
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].answers.size(), 2u);
  EXPECT_THROW(load_squad((dir / "missing.json").string()), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace qaforge
