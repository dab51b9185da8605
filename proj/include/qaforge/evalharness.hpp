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
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "qaforge/corpus_model.hpp"
#include "qaforge/error.hpp"
#include "qaforge/metrics.hpp"
#include "qaforge/sampling.hpp"

namespace qaforge {

struct SquadItem {
  std::string id;
  std::string context;
  std::string question;
  std::vector<std::string> answers;
};

inline json to_json(const SquadItem& item) {
  return json{{"id", item.id},
              {"context", item.context},
              {"question", item.question},
              {"answers", item.answers}};
}

/// Reads SQuAD JSON ({"data":[{"paragraphs":[...]}]}) or JSONL with one
/// {id, context, question, answers} object per line.
inline std::vector<SquadItem> load_squad(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto answers_of = [](const json& a) {
    std::vector<std::string> out;
    for (const auto& x : a) out.push_back(x.is_string() ? x.get<std::string>()
                                                        : x.at("text").get<std::string>());
    return out;
  };
  std::vector<SquadItem> items;
  try {
    const json doc = json::parse(text);
    if (doc.is_object() && doc.contains("data")) {
      for (const auto& article : doc.at("data"))
        for (const auto& para : article.at("paragraphs"))
          for (const auto& qa : para.at("qas"))
            items.push_back({qa.at("id").is_string() ? qa.at("id").get<std::string>()
                                                     : qa.at("id").dump(),
                             para.at("context").get<std::string>(),
                             qa.at("question").get<std::string>(), answers_of(qa.at("answers"))});
      return items;
    }
  } catch (const json::parse_error&) {
    // not a single document; fall through to JSONL
  } catch (const json::exception& e) {
    throw ValidationError("dataset '" + path + "': " + e.what());
  }
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (utf8::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      items.push_back({j.at("id").get<std::string>(), j.at("context").get<std::string>(),
                       j.at("question").get<std::string>(), answers_of(j.at("answers"))});
    } catch (const json::exception& e) {
      throw ValidationError("dataset '" + path + "' line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  return items;
}

/// Surviving triplets as SQuAD items; ids are `<passage_id>#<gen_index>`.
inline std::vector<SquadItem> to_squad_items(const std::vector<Triplet>& triplets,
                                             const std::vector<Passage>& passages) {
  std::unordered_map<std::string, const Passage*> index;
  for (const auto& p : passages) index.emplace(p.id, &p);
  std::vector<SquadItem> items;
  for (const auto& t : triplets) {
    if (t.verdict && !t.verdict->passed) continue;
    auto it = index.find(t.passage_id);
    if (it == index.end())
      throw ValidationError("triplet references unknown passage '" + t.passage_id + "'");
    items.push_back({t.passage_id + "#" + std::to_string(t.pair.gen_index), it->second->text,
                     t.pair.question, {t.pair.answer}});
  }
  return items;
}

// ---------------------------------------------------------------------------
// Scoring

struct ScoreResult {
  double em = 0.0;  // percent
  double f1 = 0.0;  // percent
  std::size_t scored = 0;
  std::size_t missing = 0;
  std::size_t extra = 0;
};

/// Mean EM/F1 over gold ids, in percent. Missing predictions score 0;
/// predictions for unknown ids are ignored.
inline ScoreResult score_prediction_file(
    const std::map<std::string, std::string>& predictions,
    const std::map<std::string, std::vector<std::string>>& gold) {
  if (gold.empty()) throw ValidationError("score_prediction_file: empty gold set");
  ScoreResult r;
  double em = 0.0, f1 = 0.0;
  for (const auto& [id, answers] : gold) {
    ++r.scored;
    auto it = predictions.find(id);
    if (it == predictions.end()) {
      ++r.missing;
      continue;
    }
    const EmF1 s = squad_em_f1(it->second, answers);
    em += s.em;
    f1 += s.f1;
  }
  for (const auto& [id, _] : predictions)
    if (!gold.count(id)) ++r.extra;
  if (r.missing) spdlog::warn("{} gold ids have no prediction; scored as 0", r.missing);
  if (r.extra) spdlog::warn("{} predictions have no gold answer; ignored", r.extra);
  r.em = 100.0 * em / static_cast<double>(r.scored);
  r.f1 = 100.0 * f1 / static_cast<double>(r.scored);
  return r;
}

inline std::map<std::string, std::vector<std::string>> gold_map(
    const std::vector<SquadItem>& items) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& i : items) out[i.id] = i.answers;
  return out;
}

inline ScoreResult score_items(const std::vector<SquadItem>& items,
                               const std::vector<std::string>& predictions) {
  if (items.size() != predictions.size())
    throw ProviderError(ProviderError::Kind::kBadResponse, "trainer",
                        "predict returned " + std::to_string(predictions.size()) +
                            " answers for " + std::to_string(items.size()) + " items");
  std::map<std::string, std::string> pred;
  for (std::size_t i = 0; i < items.size(); ++i) pred[items[i].id] = predictions[i];
  return score_prediction_file(pred, gold_map(items));
}

// ---------------------------------------------------------------------------
// Trainer role

class Trainer {
 public:
  virtual ~Trainer() = default;
  virtual std::string name() const = 0;
  /// Fine-tunes on `samples`, starting from `base` when given; returns a
  /// model handle.
  virtual std::string train(const std::vector<SquadItem>& samples, const json& params,
                            const std::optional<std::string>& base) = 0;
  virtual std::vector<std::string> predict(const std::string& handle,
                                           const std::vector<SquadItem>& items) = 0;
};

/// Answers every item with its first gold answer.
class OracleTrainer final : public Trainer {
 public:
  std::string name() const override { return "stub-oracle"; }
  std::string train(const std::vector<SquadItem>& samples, const json&,
                    const std::optional<std::string>& base) override {
    return (base ? *base + "+" : std::string()) + "oracle-" + std::to_string(samples.size());
  }
  std::vector<std::string> predict(const std::string&,
                                   const std::vector<SquadItem>& items) override {
    std::vector<std::string> out;
    for (const auto& i : items) out.push_back(i.answers.empty() ? "" : i.answers.front());
    return out;
  }
};

/// Answers every item with the empty string.
class EmptyTrainer final : public Trainer {
 public:
  std::string name() const override { return "stub-empty"; }
  std::string train(const std::vector<SquadItem>&, const json&,
                    const std::optional<std::string>&) override {
    return "empty";
  }
  std::vector<std::string> predict(const std::string&,
                                   const std::vector<SquadItem>& items) override {
    return std::vector<std::string>(items.size());
  }
};

// ---------------------------------------------------------------------------
// Experiments

enum class ExperimentKind { kSingleFinetune, kSequentialFinetune, kOwnDevFolds };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kSingleFinetune: return "exp1_single_finetune";
    case ExperimentKind::kSequentialFinetune: return "exp2_sequential_finetune";
    case ExperimentKind::kOwnDevFolds: return "exp3_own_dev_folds";
  }
  return "?";
}

inline ExperimentKind experiment_kind_from_string(std::string_view s) {
  for (auto k : {ExperimentKind::kSingleFinetune, ExperimentKind::kSequentialFinetune,
                 ExperimentKind::kOwnDevFolds})
    if (to_string(k) == s || to_string(k).substr(0, 4) == s) return k;
  throw ValidationError("unknown experiment kind '" + std::string(s) + "'");
}

struct ExperimentPlan {
  ExperimentKind kind = ExperimentKind::kSingleFinetune;
  std::vector<std::size_t> sample_sizes{50000, 100000, 300000};
  std::size_t replicas_per_size = 2;
  std::size_t folds = 5;
  std::size_t fold_dev_size = 10000;
  std::size_t fold_train_size = 100000;
  std::vector<int> continue_epochs{1, 2, 3};
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  json trainer_params = json{{"epochs", 3}, {"learning_rate", 2e-5}, {"weight_decay", 0.01}};

  std::size_t exp3_sample_size() const { return fold_dev_size + fold_train_size; }

  void validate(std::size_t dataset_size) const {
    if (replicas_per_size < 1) throw ValidationError("replicas_per_size must be >= 1");
    if (workers < 1) throw ValidationError("workers must be >= 1");
    if (kind == ExperimentKind::kOwnDevFolds) {
      if (folds < 1 || fold_dev_size < 1) throw ValidationError("folds and fold_dev_size must be >= 1");
      if (folds * fold_dev_size > exp3_sample_size())
        throw ValidationError("folds * fold_dev_size exceeds the exp3 sample");
      if (exp3_sample_size() > dataset_size)
        throw ValidationError("exp3 sample of " + std::to_string(exp3_sample_size()) +
                              " exceeds dataset size " + std::to_string(dataset_size));
    } else {
      if (sample_sizes.empty()) throw ValidationError("no sample sizes");
      for (auto s : sample_sizes)
        if (s == 0 || s > dataset_size)
          throw ValidationError("sample size " + std::to_string(s) + " outside 1.." +
                                std::to_string(dataset_size));
    }
    if (kind == ExperimentKind::kSequentialFinetune && continue_epochs.empty())
      throw ValidationError("exp2 needs continue_epochs");
  }

  static ExperimentPlan from_json(const json& j) {
    ExperimentPlan p;
    try {
      if (j.contains("kind")) p.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
      if (j.contains("sample_sizes")) p.sample_sizes = j.at("sample_sizes").get<std::vector<std::size_t>>();
      if (j.contains("replicas_per_size")) p.replicas_per_size = j.at("replicas_per_size").get<std::size_t>();
      if (j.contains("folds")) p.folds = j.at("folds").get<std::size_t>();
      if (j.contains("fold_dev_size")) p.fold_dev_size = j.at("fold_dev_size").get<std::size_t>();
      if (j.contains("fold_train_size")) p.fold_train_size = j.at("fold_train_size").get<std::size_t>();
      if (j.contains("continue_epochs")) p.continue_epochs = j.at("continue_epochs").get<std::vector<int>>();
      if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("workers")) p.workers = j.at("workers").get<std::size_t>();
      if (j.contains("trainer_params")) p.trainer_params = j.at("trainer_params");
    } catch (const json::exception& e) {
      throw ValidationError(std::string("experiment plan: ") + e.what());
    }
    return p;
  }
};

/// `replicas` samples of `size` indices into [0, n); replica r uses seed + r.
inline std::vector<std::vector<std::size_t>> draw_samples(std::size_t n, std::size_t size,
                                                          std::size_t replicas,
                                                          std::uint64_t seed) {
  if (size > n)
    throw ValidationError("sample size " + std::to_string(size) + " exceeds dataset size " +
                          std::to_string(n));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t r = 0; r < replicas; ++r) out.push_back(sample_indices(n, size, seed + r));
  return out;
}

struct FoldSplit {
  std::vector<std::size_t> dev;
  std::vector<std::size_t> train;
};

/// Splits `sample` into `folds` consecutive dev chunks; each fold trains on
/// the rest of the sample.
inline std::vector<FoldSplit> fold_splits(const std::vector<std::size_t>& sample,
                                          std::size_t folds, std::size_t dev_size) {
  if (folds * dev_size > sample.size())
    throw ValidationError("folds * fold_dev_size exceeds the sample");
  std::vector<FoldSplit> out(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const bool dev = i >= f * dev_size && i < (f + 1) * dev_size;
      (dev ? out[f].dev : out[f].train).push_back(sample[i]);
    }
  }
  return out;
}

struct EvalSets {
  std::vector<SquadItem> dev;
  std::vector<SquadItem> test;
};

struct EvalCell {
  std::string label;
  std::size_t replica = 0;
  std::optional<ScoreResult> dev;
  std::optional<ScoreResult> test;
  std::optional<ScoreResult> own_dev;
  std::optional<std::string> error;
};

struct EvalRow {
  std::string label;
  std::vector<EvalCell> cells;

  /// Mean over successful replicas of the chosen score.
  std::optional<double> mean(std::optional<ScoreResult> EvalCell::*set,
                             double ScoreResult::*metric) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells) {
      if (c.error || !(c.*set)) continue;
      sum += (*(c.*set)).*metric;
      ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::kSingleFinetune;
  std::vector<EvalRow> rows;

  json to_json() const {
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    const auto score = [](const std::optional<ScoreResult>& s) {
      return s ? json{{"em", s->em}, {"f1", s->f1}} : json(nullptr);
    };
    json rows_j = json::array();
    for (const auto& row : rows) {
      json cells = json::array();
      for (const auto& c : row.cells) {
        cells.push_back(json{{"replica", c.replica},
                             {"dev", score(c.dev)},
                             {"test", score(c.test)},
                             {"own_dev", score(c.own_dev)},
                             {"error", c.error ? json(*c.error) : json(nullptr)}});
      }
      rows_j.push_back(json{{"setup", row.label},
                            {"em_dev", opt(row.mean(&EvalCell::dev, &ScoreResult::em))},
                            {"f1_dev", opt(row.mean(&EvalCell::dev, &ScoreResult::f1))},
                            {"em_test", opt(row.mean(&EvalCell::test, &ScoreResult::em))},
                            {"f1_test", opt(row.mean(&EvalCell::test, &ScoreResult::f1))},
                            {"em_own_dev", opt(row.mean(&EvalCell::own_dev, &ScoreResult::em))},
                            {"f1_own_dev", opt(row.mean(&EvalCell::own_dev, &ScoreResult::f1))},
                            {"cells", cells}});
    }
    return json{{"experiment", std::string(to_string(kind))}, {"rows", rows_j}};
  }

  /// Aligned text table, one row per setup.
  std::string to_table() const {
    const bool own = kind == ExperimentKind::kOwnDevFolds;
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"setup", "EM dev", "F1 dev", "EM test", "F1 test"});
    if (own) {
      grid.back().push_back("EM own");
      grid.back().push_back("F1 own");
    }
    const auto cell = [](const std::optional<double>& v) {
      if (!v) return std::string("-");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", *v);
      return std::string(buf);
    };
    for (const auto& row : rows) {
      grid.push_back({row.label, cell(row.mean(&EvalCell::dev, &ScoreResult::em)),
                      cell(row.mean(&EvalCell::dev, &ScoreResult::f1)),
                      cell(row.mean(&EvalCell::test, &ScoreResult::em)),
                      cell(row.mean(&EvalCell::test, &ScoreResult::f1))});
      if (own) {
        grid.back().push_back(cell(row.mean(&EvalCell::own_dev, &ScoreResult::em)));
        grid.back().push_back(cell(row.mean(&EvalCell::own_dev, &ScoreResult::f1)));
      }
    }
    std::vector<std::size_t> width(grid.front().size(), 0);
    for (const auto& r : grid)
      for (std::size_t c = 0; c < r.size(); ++c)
        width[c] = std::max(width[c], utf8::length(r[c]));
    std::string out;
    for (const auto& r : grid) {
      for (std::size_t c = 0; c < r.size(); ++c) {
        if (c) out += "  ";
        const std::size_t pad = width[c] - utf8::length(r[c]);
        if (c == 0) out += r[c] + std::string(pad, ' ');
        else out += std::string(pad, ' ') + r[c];
      }
      out += '\n';
    }
    return out;
  }
};

namespace detail {

inline std::vector<SquadItem> pick(const std::vector<SquadItem>& data,
                                   const std::vector<std::size_t>& idx) {
  std::vector<SquadItem> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data[i]);
  return out;
}

}  // namespace detail

/// Runs the experiment grid. `continuation` is the second dataset of the
/// sequential setup (ignored otherwise). A failing cell records its error
/// and the rest of the grid proceeds.
inline ExperimentResult run_experiment(const ExperimentPlan& plan,
                                       const std::vector<SquadItem>& dataset, Trainer& trainer,
                                       const EvalSets& eval,
                                       const std::vector<SquadItem>& continuation = {}) {
  plan.validate(dataset.size());
  if (plan.kind == ExperimentKind::kSequentialFinetune && continuation.empty())
    throw ValidationError("exp2 needs a continuation dataset");

  struct Job {
    std::size_t row;
    std::size_t replica;
    std::vector<std::size_t> train;
    std::vector<std::size_t> own_dev;
    std::optional<int> continue_epochs;
  };
  ExperimentResult result;
  result.kind = plan.kind;
  std::vector<Job> jobs;
  if (plan.kind == ExperimentKind::kOwnDevFolds) {
    const auto sample = sample_indices(dataset.size(), plan.exp3_sample_size(), plan.seed);
    const auto splits = fold_splits(sample, plan.folds, plan.fold_dev_size);
    for (std::size_t f = 0; f < splits.size(); ++f) {
      result.rows.push_back({"fold " + std::to_string(f + 1), {}});
      jobs.push_back({f, 0, splits[f].train, splits[f].dev, std::nullopt});
    }
  } else {
    for (std::size_t size : plan.sample_sizes) {
      const auto samples = draw_samples(dataset.size(), size, plan.replicas_per_size, plan.seed);
      if (plan.kind == ExperimentKind::kSingleFinetune) {
        result.rows.push_back({std::to_string(size), {}});
        for (std::size_t r = 0; r < samples.size(); ++r)
          jobs.push_back({result.rows.size() - 1, r, samples[r], {}, std::nullopt});
      } else {
        for (int e : plan.continue_epochs) {
          result.rows.push_back({std::to_string(size) + " + " + std::to_string(e) + " ep", {}});
          for (std::size_t r = 0; r < samples.size(); ++r)
            jobs.push_back({result.rows.size() - 1, r, samples[r], {}, e});
        }
      }
    }
  }

  std::vector<EvalCell> cells(jobs.size());
  std::mutex trainer_mutex;
  const auto run_job = [&](std::size_t j) {
    const Job& job = jobs[j];
    EvalCell& cell = cells[j];
    cell.label = result.rows[job.row].label;
    cell.replica = job.replica;
    try {
      const auto train = detail::pick(dataset, job.train);
      std::string handle;
      {
        std::lock_guard lock(trainer_mutex);
        handle = trainer.train(train, plan.trainer_params, std::nullopt);
        if (job.continue_epochs) {
          json params = plan.trainer_params;
          params["epochs"] = *job.continue_epochs;
          handle = trainer.train(continuation, params, handle);
        }
      }
      const auto score = [&](const std::vector<SquadItem>& items) -> std::optional<ScoreResult> {
        if (items.empty()) return std::nullopt;
        std::vector<std::string> answers;
        {
          std::lock_guard lock(trainer_mutex);
          answers = trainer.predict(handle, items);
        }
        return score_items(items, answers);
      };
      cell.dev = score(eval.dev);
      cell.test = score(eval.test);
      if (!job.own_dev.empty()) cell.own_dev = score(detail::pick(dataset, job.own_dev));
    } catch (const ProviderError& e) {
      spdlog::warn("cell '{}' replica {} failed: {}", cell.label, cell.replica, e.what());
      cell.error = e.what();
    }
  };
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) run_job(j);
  };
  const std::size_t workers = std::min(plan.workers, std::max<std::size_t>(1, jobs.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (std::size_t j = 0; j < jobs.size(); ++j)
    result.rows[jobs[j].row].cells.push_back(std::move(cells[j]));
  return result;
}

}  // namespace qaforge
