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
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "qaforge/corpus_model.hpp"
#include "qaforge/error.hpp"
#include "qaforge/evalharness.hpp"
#include "qaforge/filter.hpp"
#include "qaforge/genio.hpp"
#include "qaforge/ingest.hpp"
#include "qaforge/kvconfig.hpp"
#include "qaforge/stats.hpp"
#include "qaforge/transport.hpp"

#ifndef QAFORGE_VERSION
#define QAFORGE_VERSION "0.0.0"
#endif

namespace qaforge::cli {

namespace fs = std::filesystem;

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      // shared
      "seed", "workers", "retries", "timeout_seconds", "log_level",
      "generator", "reader", "ner", "lemmatizer", "embedder", "trainer", "lemma_table",
      "ner_fallback", "lemma_fallback",
      // ingest
      "domain", "batch_count", "min_chars", "max_chars", "exclude_category_patterns",
      // generate
      "style", "max_length", "beams", "no_repeat_ngram", "repetition_penalty",
      "pairs_per_passage", "one_pass", "max_attempts", "abort_after_unavailable",
      "chunk_size",
      // filter
      "stages", "lemma_overlap_threshold", "dedup_threshold", "max_interrogatives",
      "overlap_mode", "ngram_gold_vs_generated", "ngram_question_vs_generated",
      "ngram_text_vs_generated", "ngram_text_vs_question", "reader_score_min", "wmd_low",
      "wmd_high", "wmd_keep_inside", "dedup_level", "dedup_scope", "unresolved_policy",
      // stats
      "self_bleu_sample", "top_k", "category_groups"};
  return keys;
}

// ---------------------------------------------------------------------------
// Files

/// A passages argument may name the ingest output directory or the file.
inline fs::path passages_path(const fs::path& arg) {
  return fs::is_directory(arg) ? arg / "passages.jsonl" : arg;
}

inline std::vector<Passage> load_passages(const fs::path& arg) {
  const fs::path path = passages_path(arg);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open passages '" + path.string() + "'");
  auto result = read_passages(in);
  for (const auto& e : result.errors)
    spdlog::warn("{}:{}: {}", path.string(), e.line, e.message);
  return std::move(result.items);
}

/// Streams triplets from a JSONL (optionally gzip) file. Malformed lines
/// are skipped with a warning; more than `max_errors` aborts.
inline void for_each_triplet(const fs::path& path, const std::function<void(Triplet)>& fn,
                             std::size_t max_errors = 100) {
  if (!fs::exists(path)) throw IoError("cannot open triplets '" + path.string() + "'");
  std::size_t line_no = 0, errors = 0;
  for_each_line(path.string(), [&](std::string_view line) {
    ++line_no;
    if (utf8::trim(line).empty()) return;
    Triplet t;
    try {
      t = triplet_from_json(json::parse(line));
    } catch (const std::exception& e) {
      spdlog::warn("{}:{}: {}", path.string(), line_no, e.what());
      if (++errors > max_errors)
        throw ValidationError("too many malformed lines in '" + path.string() + "'");
      return;
    }
    fn(std::move(t));
  });
}

inline std::vector<Triplet> load_triplets(const fs::path& path) {
  std::vector<Triplet> out;
  for_each_triplet(path, [&](Triplet t) { out.push_back(std::move(t)); });
  return out;
}

/// Writes via a temporary sibling and renames, so readers never see a
/// partial file.
inline void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

inline void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const fs::path& path, bool append = false) : path_(path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!out_) throw IoError("cannot write '" + path.string() + "'");
  }
  void write(const json& j) {
    out_ << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    if (!out_) throw WriteError("write failed for '" + path_.string() + "'", written_);
    ++written_;
  }
  void flush() {
    out_.flush();
    if (!out_) throw WriteError("flush failed for '" + path_.string() + "'", written_);
  }
  std::size_t written() const { return written_; }

 private:
  fs::path path_;
  std::ofstream out_;
  std::size_t written_ = 0;
};

// ---------------------------------------------------------------------------
// Providers

inline bool is_stub(const std::string& endpoint) { return endpoint.rfind("stub", 0) == 0; }
inline bool is_none(const std::string& endpoint) {
  return endpoint.empty() || endpoint == "none";
}

inline TransportOptions transport_options(const KvConfig& c) {
  TransportOptions t;
  t.timeout_seconds = c.get_double("timeout_seconds", t.timeout_seconds);
  t.retries = static_cast<int>(c.get_int("retries", t.retries));
  if (t.retries < 0) throw ValidationError("retries must be >= 0");
  if (!(t.timeout_seconds > 0)) throw ValidationError("timeout_seconds must be positive");
  return t;
}

inline LemmaTable load_lemma_table(const fs::path& path) {
  LemmaTable table;
  for_each_line(path.string(), [&](std::string_view line) {
    line = utf8::trim(line);
    if (line.empty() || line.front() == '#') return;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw ValidationError("lemma table '" + path.string() + "': expected form<TAB>lemma");
    table[utf8::to_lower(utf8::trim(line.substr(0, tab)))] =
        utf8::to_lower(utf8::trim(line.substr(tab + 1)));
  });
  return table;
}

struct ProviderSet {
  std::unique_ptr<Reader> reader;
  std::unique_ptr<EntityRecognizer> ner;
  std::unique_ptr<Lemmatizer> lemmatizer;
  std::unique_ptr<Embedder> embedder;

  Providers view(const KvConfig& c) const {
    Providers p;
    p.reader = reader.get();
    p.ner = ner.get();
    p.lemmatizer = lemmatizer.get();
    p.embedder = embedder.get();
    p.ner_fallback = c.get_bool("ner_fallback", true);
    p.lemma_fallback = c.get_bool("lemma_fallback", true);
    return p;
  }
};

inline std::unique_ptr<Lemmatizer> make_lemmatizer(const KvConfig& c) {
  const std::string ep = c.get_string("lemmatizer", "stub:");
  if (is_none(ep)) return nullptr;
  if (is_stub(ep)) {
    LemmaTable table;
    if (auto path = c.get("lemma_table"); path && !path->empty()) table = load_lemma_table(*path);
    return std::make_unique<TableLemmatizer>(std::move(table));
  }
  return std::make_unique<HttpLemmatizer>(ep, transport_options(c));
}

inline ProviderSet make_providers(const KvConfig& c) {
  ProviderSet s;
  const auto t = transport_options(c);
  const std::string reader = c.get_string("reader", "stub:");
  if (is_stub(reader)) s.reader = std::make_unique<ExtractiveStubReader>();
  else if (!is_none(reader)) s.reader = std::make_unique<HttpReader>(reader, t);
  const std::string ner = c.get_string("ner", "stub:");
  if (is_stub(ner)) s.ner = std::make_unique<CapitalizationRecognizer>();
  else if (!is_none(ner)) s.ner = std::make_unique<HttpEntityRecognizer>(ner, t);
  s.lemmatizer = make_lemmatizer(c);
  const std::string emb = c.get_string("embedder", "stub:");
  if (is_stub(emb)) s.embedder = std::make_unique<HashEmbedder>();
  else if (!is_none(emb)) s.embedder = std::make_unique<HttpEmbedder>(emb, t);
  return s;
}

// ---------------------------------------------------------------------------
// Typed configs from key/value settings

inline FilterConfig filter_config(const KvConfig& c) {
  FilterConfig f;
  f.lemma_overlap_threshold = c.get_double("lemma_overlap_threshold", f.lemma_overlap_threshold);
  f.dedup_threshold = c.get_double("dedup_threshold", f.dedup_threshold);
  f.max_interrogatives = static_cast<int>(c.get_int("max_interrogatives", f.max_interrogatives));
  if (auto m = c.get("overlap_mode")) f.overlap_mode = overlap_mode_from_string(*m);
  auto& n = f.ngram_thresholds;
  n.gold_vs_generated = c.get_double("ngram_gold_vs_generated", n.gold_vs_generated);
  n.question_vs_generated = c.get_double("ngram_question_vs_generated", n.question_vs_generated);
  n.text_vs_generated = c.get_double("ngram_text_vs_generated", n.text_vs_generated);
  n.text_vs_question = c.get_double("ngram_text_vs_question", n.text_vs_question);
  f.reader_score_min = c.get_double("reader_score_min", f.reader_score_min);
  f.wmd_low = c.get_double("wmd_low", f.wmd_low);
  f.wmd_high = c.get_double("wmd_high", f.wmd_high);
  f.wmd_keep_inside = c.get_bool("wmd_keep_inside", f.wmd_keep_inside);
  if (auto v = c.get("dedup_level")) {
    if (*v == "character") f.dedup_level = EditLevel::kCharacter;
    else if (*v == "token") f.dedup_level = EditLevel::kToken;
    else throw ValidationError("dedup_level must be character or token");
  }
  if (auto v = c.get("dedup_scope")) {
    if (*v == "passage_group") f.dedup_scope = DedupScope::kPassageGroup;
    else if (*v == "survivors") f.dedup_scope = DedupScope::kSurvivors;
    else throw ValidationError("dedup_scope must be passage_group or survivors");
  }
  if (auto v = c.get("unresolved_policy")) {
    if (*v == "reject") f.unresolved_policy = UnresolvedPolicy::kReject;
    else if (*v == "skip") f.unresolved_policy = UnresolvedPolicy::kSkip;
    else throw ValidationError("unresolved_policy must be reject or skip");
  }
  f.validate();
  return f;
}

/// `stages` lists the enabled stages; they keep the standard order.
inline StagePlan stage_plan(const KvConfig& c) {
  StagePlan plan = StagePlan::standard();
  if (auto v = c.get("stages")) {
    plan.enabled.clear();
    for (const auto& name : c.get_list("stages", {})) plan.enabled.insert(stage_from_name(name));
  }
  plan.validate();
  return plan;
}

inline IngestConfig ingest_config(const KvConfig& c) {
  IngestConfig cfg = IngestConfig::for_domain(domain_from_string(c.get_string("domain", "wiki")));
  cfg.batch_count = static_cast<int>(c.get_int("batch_count", cfg.batch_count));
  if (auto v = c.get_optional_int("min_chars")) cfg.min_chars = static_cast<std::size_t>(*v);
  if (auto v = c.get_optional_int("max_chars")) cfg.max_chars = static_cast<std::size_t>(*v);
  cfg.exclude_category_patterns =
      c.get_list("exclude_category_patterns", cfg.exclude_category_patterns);
  cfg.seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
  cfg.validate();
  return cfg;
}

inline GenParams gen_params(const KvConfig& c, ModelTag style) {
  GenParams p = GenParams::for_style(style);
  p.max_length = static_cast<int>(c.get_int("max_length", p.max_length));
  p.beams = static_cast<int>(c.get_int("beams", p.beams));
  p.no_repeat_ngram = static_cast<int>(c.get_int("no_repeat_ngram", p.no_repeat_ngram));
  p.repetition_penalty = c.get_double("repetition_penalty", p.repetition_penalty);
  p.pairs_per_passage = static_cast<int>(c.get_int("pairs_per_passage", p.pairs_per_passage));
  p.one_pass = c.get_bool("one_pass", p.one_pass);
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Subcommands

struct Shared {
  KvConfig config;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

inline int run_ingest(const Shared& s, const std::vector<std::string>& inputs,
                      const fs::path& out_dir, std::ostream& out) {
  Ingester ingester(ingest_config(s.config));
  for (const auto& in : inputs) ingest_file(in, ingester);
  auto [passages, report] = std::move(ingester).finish();
  std::vector<Passage> ordered;
  ordered.reserve(passages.size());
  for (const Passage* p : generation_order(passages)) ordered.push_back(*p);
  fs::create_directories(out_dir);
  JsonlWriter writer(out_dir / "passages.jsonl.tmp");
  for (const auto& p : ordered) writer.write(to_json(p));
  writer.flush();
  fs::rename(out_dir / "passages.jsonl.tmp", out_dir / "passages.jsonl");
  write_json_file(out_dir / "ingest_report.json", report.to_json());
  out << report.to_json().dump(2) << "\n";
  spdlog::info("ingest: kept {} of {} records", report.kept, report.input);
  return 0;
}

inline int run_generate(const Shared& s, const fs::path& passages_arg, const fs::path& out_dir,
                        bool resume, std::optional<fs::path> params_file) {
  const std::string style_name = s.config.get_string("style", "gpt");
  PromptStyle style;
  if (style_name == "gpt") style = PromptStyle::gpt();
  else if (style_name == "t5") style = PromptStyle::t5();
  else throw ValidationError("style must be gpt or t5");
  GenParams params = gen_params(s.config, style.style_tag);
  if (params_file) {
    const json j = read_json_file(*params_file);
    try {
      if (j.contains("max_length")) params.max_length = j.at("max_length").get<int>();
      if (j.contains("beams")) params.beams = j.at("beams").get<int>();
      if (j.contains("no_repeat_ngram")) params.no_repeat_ngram = j.at("no_repeat_ngram").get<int>();
      if (j.contains("repetition_penalty"))
        params.repetition_penalty = j.at("repetition_penalty").get<double>();
      if (j.contains("pairs_per_passage"))
        params.pairs_per_passage = j.at("pairs_per_passage").get<int>();
      if (j.contains("one_pass")) params.one_pass = j.at("one_pass").get<bool>();
    } catch (const json::exception& e) {
      throw ValidationError("params file: " + std::string(e.what()));
    }
    params.validate();
  }

  const std::string endpoint = s.config.get_string("generator", "stub:");
  std::unique_ptr<Generator> generator;
  if (is_stub(endpoint)) generator = std::make_unique<StubGenerator>();
  else generator = std::make_unique<HttpGenerator>(endpoint, transport_options(s.config));

  GenerateOptions options;
  options.workers = s.workers;
  options.max_attempts = static_cast<int>(s.config.get_int("max_attempts", options.max_attempts));
  options.abort_after_unavailable = static_cast<std::size_t>(
      s.config.get_int("abort_after_unavailable", static_cast<std::int64_t>(options.abort_after_unavailable)));
  options.chunk_size = static_cast<std::size_t>(
      s.config.get_int("chunk_size", static_cast<std::int64_t>(options.chunk_size)));
  options.model_tag = is_stub(endpoint) ? ModelTag::kStub : style.style_tag;
  if (options.max_attempts < 1) throw ValidationError("max_attempts must be >= 1");

  const std::vector<Passage> passages = load_passages(passages_arg);
  fs::create_directories(out_dir);
  const fs::path triplets_path = out_dir / "triplets.jsonl";
  const fs::path checkpoint_path = out_dir / "checkpoint.json";

  Checkpoint checkpoint;
  if (resume && fs::exists(checkpoint_path)) {
    try {
      checkpoint = Checkpoint::from_json(read_json_file(checkpoint_path));
    } catch (const json::exception& e) {
      throw ValidationError("checkpoint: " + std::string(e.what()));
    }
    // Keep only triplets of passages the checkpoint covers; anything after
    // it was written by an interrupted chunk and is regenerated.
    std::unordered_map<std::string, const Passage*> by_id;
    for (const auto& p : passages) by_id.emplace(p.id, &p);
    std::vector<Triplet> kept;
    if (fs::exists(triplets_path)) {
      for_each_triplet(triplets_path, [&](Triplet t) {
        auto it = by_id.find(t.passage_id);
        if (it != by_id.end() && checkpoint.done(*it->second)) kept.push_back(std::move(t));
      });
    }
    JsonlWriter rewrite(triplets_path.string() + ".tmp");
    for (const auto& t : kept) rewrite.write(to_json(t));
    rewrite.flush();
    fs::rename(triplets_path.string() + ".tmp", triplets_path);
  }

  JsonlWriter writer(triplets_path, resume);
  const auto save = [&](const Checkpoint& c) {
    writer.flush();
    write_json_file(checkpoint_path, c.to_json());
  };
  const GenerateReport report = generate_for_passages(
      passages, *generator, style, params, options,
      [&](const Triplet& t) { writer.write(to_json(t)); }, checkpoint, save);
  save(checkpoint);
  write_json_file(out_dir / "generate_report.json", report.to_json());
  spdlog::info("generate: {} triplets from {} passages ({} skipped, {} resumed)",
               report.triplets, report.passages, report.skipped.size(), report.resumed_skip);
  return 0;
}

inline int run_filter(const Shared& s, const fs::path& in, const fs::path& passages_arg,
                      const fs::path& out_path, std::optional<fs::path> report_path,
                      std::optional<fs::path> survivors_path) {
  const FilterConfig config = filter_config(s.config);
  const StagePlan plan = stage_plan(s.config);
  const ProviderSet providers = make_providers(s.config);
  const FilterEngine engine(config, plan, providers.view(s.config), WhLexicon::russian_default(),
                            s.workers);
  const std::vector<Passage> passages = load_passages(passages_arg);
  const PassageIndex index = index_passages(passages);

  JsonlWriter out(out_path);
  std::optional<JsonlWriter> kept;
  if (survivors_path) kept.emplace(*survivors_path);
  FilterReport total;
  for (StageId id : plan.active()) total.per_stage[std::string(stage_name(id))] = 0;

  // Triplets of one passage must be contiguous; groups are filtered in
  // chunks so memory stays bounded.
  constexpr std::size_t kChunk = 1 << 16;
  std::vector<Triplet> chunk;
  std::unordered_set<std::string> closed;
  const auto flush = [&] {
    if (chunk.empty()) return;
    total.merge(engine.run(chunk, index));
    for (const auto& t : chunk) {
      out.write(to_json(t));
      if (kept && t.verdict->passed) kept->write(to_json(t));
    }
    chunk.clear();
  };
  std::optional<std::string> current;
  for_each_triplet(in, [&](Triplet t) {
    if (current != t.passage_id) {
      if (current) closed.insert(*current);
      if (closed.count(t.passage_id))
        throw ValidationError("triplets of passage '" + t.passage_id +
                              "' are not contiguous in the input");
      current = t.passage_id;
      if (chunk.size() >= kChunk) flush();
    }
    chunk.push_back(std::move(t));
  });
  flush();
  out.flush();
  if (kept) kept->flush();
  if (report_path) write_json_file(*report_path, total.to_json());
  spdlog::info("filter: {} of {} triplets survived", total.survivors, total.input);
  return 0;
}

inline int run_stats(const Shared& s, const fs::path& in, const fs::path& passages_arg,
                     const fs::path& out_path) {
  DiversityOptions options;
  options.seed = s.seed;
  options.workers = s.workers;
  options.self_bleu_sample =
      static_cast<std::size_t>(s.config.get_int("self_bleu_sample", 5000));
  options.top_k = static_cast<std::size_t>(s.config.get_int("top_k", 10));
  if (auto g = s.config.get("category_groups"); g && !g->empty())
    options.groups = load_category_groups(*g);
  const auto lemmatizer = make_lemmatizer(s.config);
  options.lemmatizer = lemmatizer.get();
  const auto report = diversity_report(load_triplets(in), load_passages(passages_arg), options);
  write_json_file(out_path, report.to_json());
  spdlog::info("stats: self-BLEU median {:.4f} over {} survivors", report.self_bleu_median,
               report.survivors);
  return 0;
}

struct EvalArgs {
  std::optional<fs::path> plan;
  fs::path dataset;
  std::optional<fs::path> passages;
  std::optional<fs::path> dev;
  std::optional<fs::path> test;
  std::optional<fs::path> continuation;
  std::optional<fs::path> predictions;
  fs::path out;
  std::optional<fs::path> table;
};

inline std::vector<SquadItem> load_dataset(const fs::path& path,
                                           const std::optional<fs::path>& passages) {
  if (passages) return to_squad_items(load_triplets(path), load_passages(*passages));
  return load_squad(path.string());
}

inline int run_eval(const Shared& s, const EvalArgs& a, std::ostream& out) {
  const auto dataset = load_dataset(a.dataset, a.passages);
  if (a.predictions) {
    const json j = read_json_file(*a.predictions);
    std::map<std::string, std::string> preds;
    try {
      preds = j.get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
      throw ValidationError("predictions must map id to answer string: " + std::string(e.what()));
    }
    const ScoreResult r = score_prediction_file(preds, gold_map(dataset));
    const json result{{"em", r.em}, {"f1", r.f1}, {"scored", r.scored},
                      {"missing", r.missing}, {"extra", r.extra}};
    write_json_file(a.out, result);
    out << result.dump(2) << "\n";
    return 0;
  }
  if (!a.plan) throw ValidationError("eval needs --plan (or --predictions to score a file)");
  ExperimentPlan plan = ExperimentPlan::from_json(read_json_file(*a.plan));
  if (!read_json_file(*a.plan).contains("seed")) plan.seed = s.seed;
  if (!read_json_file(*a.plan).contains("workers")) plan.workers = s.workers;
  EvalSets sets;
  if (a.dev) sets.dev = load_squad(a.dev->string());
  if (a.test) sets.test = load_squad(a.test->string());
  std::vector<SquadItem> continuation;
  if (a.continuation) continuation = load_squad(a.continuation->string());

  const std::string endpoint = s.config.get_string("trainer", "stub:oracle");
  std::unique_ptr<Trainer> trainer;
  if (endpoint == "stub:empty") trainer = std::make_unique<EmptyTrainer>();
  else if (is_stub(endpoint)) trainer = std::make_unique<OracleTrainer>();
  else
    trainer = std::make_unique<HttpTrainer>(endpoint, a.out.parent_path() / "samples",
                                            transport_options(s.config));
  const ExperimentResult result = run_experiment(plan, dataset, *trainer, sets, continuation);
  write_json_file(a.out, result.to_json());
  if (a.table) write_text_file(*a.table, result.to_table());
  out << result.to_table();
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point

inline void setup_logging(const std::string& level) {
  auto logger = spdlog::get("qaforge");
  if (!logger) {
    logger = spdlog::stderr_logger_mt("qaforge");
    logger->set_pattern("[%l] %v");
  }
  spdlog::set_default_logger(logger);
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off")
    throw ValidationError("unknown log level '" + level + "'");
  spdlog::set_level(lvl);
}

/// Runs one command line. Exit codes: 0 success, 1 invalid input or usage,
/// 2 provider failure, 3 I/O failure.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"qaforge: SQuAD-style QA generation and filtration engine", "qaforge"};
  app.set_version_flag("--version", QAFORGE_VERSION);
  app.require_subcommand(1);

  std::optional<std::string> config_file;
  std::vector<std::string> assignments;
  std::optional<std::int64_t> seed;
  std::optional<std::int64_t> workers;
  std::string log_level = "info";
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key = value settings file");
    sub->add_option("--set", assignments, "override one setting (key=value), repeatable");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
  };
  std::map<std::string, std::string> flag_values;
  const auto keyed = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                         const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&flag_values, key](const std::string& v) { flag_values[key] = v; }, help);
  };

  auto* ingest = app.add_subcommand("ingest", "build the passage store");
  std::vector<std::string> ingest_in;
  std::string ingest_out;
  ingest->add_option("--in", ingest_in, "input JSONL/TXT files (gzip ok)")->required();
  ingest->add_option("--out", ingest_out, "output directory")->required();
  keyed(ingest, "--domain", "domain", "wiki|news|social|reviews|fiction|other");
  keyed(ingest, "--batches", "batch_count", "number of batches");
  keyed(ingest, "--min-chars", "min_chars", "minimum text length");
  keyed(ingest, "--max-chars", "max_chars", "maximum text length");
  add_common(ingest);

  auto* generate = app.add_subcommand("generate", "generate QA pairs");
  std::string gen_passages, gen_out;
  std::optional<std::string> gen_params_file;
  bool gen_resume = false;
  generate->add_option("--passages", gen_passages, "passage store")->required();
  generate->add_option("--out", gen_out, "output directory")->required();
  generate->add_option("--params", gen_params_file, "decoding parameters JSON");
  generate->add_flag("--resume", gen_resume, "continue from the checkpoint");
  keyed(generate, "--style", "style", "gpt|t5");
  keyed(generate, "--endpoint", "generator", "generator endpoint (http://... or stub:)");
  add_common(generate);

  auto* filter = app.add_subcommand("filter", "run the filtration cascade");
  std::string filter_in, filter_passages, filter_out;
  std::optional<std::string> filter_report, filter_survivors;
  filter->add_option("--in", filter_in, "triplets JSONL")->required();
  filter->add_option("--passages", filter_passages, "passage store")->required();
  filter->add_option("--out", filter_out, "every triplet with its verdict")->required();
  filter->add_option("--report", filter_report, "report JSON");
  filter->add_option("--survivors", filter_survivors, "surviving triplets only");
  keyed(filter, "--stages", "stages", "enabled stages, comma separated");
  keyed(filter, "--reader", "reader", "reader endpoint");
  keyed(filter, "--ner", "ner", "NER endpoint");
  keyed(filter, "--lemmatizer", "lemmatizer", "lemmatizer endpoint");
  keyed(filter, "--embedder", "embedder", "embedder endpoint");
  add_common(filter);

  auto* stats = app.add_subcommand("stats", "corpus diagnostics");
  std::string stats_in, stats_passages, stats_out;
  stats->add_option("--in", stats_in, "triplets JSONL")->required();
  stats->add_option("--passages", stats_passages, "passage store")->required();
  stats->add_option("--out", stats_out, "report JSON")->required();
  keyed(stats, "--self-bleu-sample", "self_bleu_sample", "Self-BLEU sample size");
  keyed(stats, "--category-groups", "category_groups", "category group rules file");
  keyed(stats, "--lemmatizer", "lemmatizer", "lemmatizer endpoint");
  add_common(stats);

  auto* eval = app.add_subcommand("eval", "evaluation experiments and scoring");
  EvalArgs ea;
  std::optional<std::string> plan, passages, dev, test, cont, preds, table;
  std::string dataset, eval_out;
  eval->add_option("--plan", plan, "experiment plan JSON");
  eval->add_option("--dataset", dataset, "SQuAD JSON/JSONL, or triplets with --passages")->required();
  eval->add_option("--passages", passages, "passage store for a triplet dataset");
  eval->add_option("--sberquad-dev", dev, "external dev set");
  eval->add_option("--sberquad-test", test, "external test set");
  eval->add_option("--continuation", cont, "second fine-tuning set for exp2");
  eval->add_option("--predictions", preds, "score this id->answer JSON against --dataset");
  eval->add_option("--out", eval_out, "results JSON")->required();
  eval->add_option("--table", table, "aligned text table");
  keyed(eval, "--endpoint", "trainer", "trainer endpoint (http://..., stub:oracle, stub:empty)");
  add_common(eval);

  std::vector<std::string> argv_store{"qaforge"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    setup_logging(log_level);
    Shared s;
    if (config_file) s.config = KvConfig::load(*config_file);
    s.config.apply_env(known_keys());
    for (const auto& [k, v] : flag_values) s.config.set(k, v);
    for (const auto& a : assignments) s.config.set_assignment(a);
    if (seed) s.config.set("seed", std::to_string(*seed));
    if (workers) s.config.set("workers", std::to_string(*workers));
    s.config.require_known(known_keys());
    if (s.config.has("log_level") && log_level == "info") setup_logging(*s.config.get("log_level"));
    s.seed = static_cast<std::uint64_t>(s.config.get_int("seed", 0));
    const auto w = s.config.get_int("workers", 1);
    if (w < 1) throw ValidationError("workers must be >= 1");
    s.workers = static_cast<std::size_t>(w);

    CLI::App* sub = app.get_subcommands().front();
    spdlog::info("qaforge {} {} seed={} config_hash={:016x}", QAFORGE_VERSION, sub->get_name(),
                 s.seed, fnv1a64(s.config.canonical(), fnv1a64(sub->get_name())));

    if (sub == ingest) return run_ingest(s, ingest_in, ingest_out, out);
    if (sub == generate) {
      std::optional<fs::path> pf;
      if (gen_params_file) pf = *gen_params_file;
      return run_generate(s, gen_passages, gen_out, gen_resume, pf);
    }
    if (sub == filter) {
      std::optional<fs::path> rp, sp;
      if (filter_report) rp = *filter_report;
      if (filter_survivors) sp = *filter_survivors;
      return run_filter(s, filter_in, filter_passages, filter_out, rp, sp);
    }
    if (sub == stats) return run_stats(s, stats_in, stats_passages, stats_out);
    if (sub == eval) {
      const auto opt = [](const std::optional<std::string>& v) -> std::optional<fs::path> {
        if (!v) return std::nullopt;
        return fs::path(*v);
      };
      ea.plan = opt(plan);
      ea.dataset = dataset;
      ea.passages = opt(passages);
      ea.dev = opt(dev);
      ea.test = opt(test);
      ea.continuation = opt(cont);
      ea.predictions = opt(preds);
      ea.out = eval_out;
      ea.table = opt(table);
      return run_eval(s, ea, out);
    }
    return 1;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const ProviderError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 1;
  }
}

inline int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args);
}

}  // namespace qaforge::cli
