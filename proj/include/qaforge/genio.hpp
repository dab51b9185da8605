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
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "qaforge/corpus_model.hpp"
#include "qaforge/error.hpp"
#include "qaforge/sampling.hpp"
#include "qaforge/textproc.hpp"

namespace qaforge {

struct PromptStyle {
  std::string text_marker;
  std::string question_marker;
  std::string answer_marker;
  std::string eos_marker;
  ModelTag style_tag = ModelTag::kGptStyle;

  static PromptStyle gpt() {
    return {"<[TEXT]>", "<[QUESTION]>", "<[ANSWER]>", "</s>", ModelTag::kGptStyle};
  }
  /// Russian-word markers; the exact strings are configurable.
  static PromptStyle t5() {
    return {"<[ТЕКСТ]>", "<[ВОПРОС]>", "<[ОТВЕТ]>", "</s>", ModelTag::kT5Style};
  }

  std::vector<std::string_view> markers() const {
    return {text_marker, question_marker, answer_marker, eos_marker};
  }

  void validate() const {
    const auto m = markers();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i].empty()) throw ValidationError("prompt markers must be non-empty");
      for (std::size_t j = i + 1; j < m.size(); ++j)
        if (m[i] == m[j]) throw ValidationError("prompt markers must be distinct");
    }
  }
};

/// Decoding parameters, passed to the generator provider untouched.
struct GenParams {
  int max_length = 1048;
  int beams = 7;
  int no_repeat_ngram = 3;
  double repetition_penalty = 2.0;
  int pairs_per_passage = 3;
  // One decoding call parsed into up to pairs_per_passage pairs, or one call
  // per pair keeping the first parsed pair of each.
  bool one_pass = true;

  static GenParams for_style(ModelTag style) {
    GenParams p;
    if (style == ModelTag::kT5Style) {
      p.max_length = 512;
      p.beams = 12;
    }
    return p;
  }

  void validate() const {
    if (max_length <= 0 || beams <= 0 || no_repeat_ngram <= 0 ||
        repetition_penalty <= 0.0 || pairs_per_passage <= 0)
      throw ValidationError("generation parameters must all be positive");
  }

  json to_json() const {
    return json{{"max_length", max_length},
                {"num_beams", beams},
                {"no_repeat_ngram_size", no_repeat_ngram},
                {"repetition_penalty", repetition_penalty},
                {"num_return_pairs", pairs_per_passage}};
  }
};

/// Prompt for one passage: text marker, text, question marker. Generation
/// continues after the question marker.
inline std::string format_prompt(const Passage& passage, const PromptStyle& style) {
  if (utf8::trim(passage.text).empty())
    throw ValidationError("format_prompt: passage '" + passage.id + "' has empty text");
  for (std::string_view marker : style.markers()) {
    if (passage.text.find(marker) != std::string::npos) {
      throw ValidationError("format_prompt: passage '" + passage.id +
                            "' contains marker '" + std::string(marker) + "'");
    }
  }
  return style.text_marker + passage.text + style.question_marker;
}

struct ParseReport {
  std::size_t pairs = 0;
  std::size_t malformed = 0;
  std::size_t extra = 0;
};

struct ParseResult {
  std::vector<QAPair> pairs;
  ParseReport report;
};

/// Splits raw model output into (question, answer) pairs. Output is cut at
/// the first end-of-sequence or text marker. Fragments that do not hold
/// exactly one answer marker with text on both sides, including a truncated
/// trailing fragment, are dropped and counted as malformed. Pairs beyond
/// `pairs_per_passage` are counted as extra.
inline ParseResult parse_generation(std::string_view raw, const PromptStyle& style,
                                    int pairs_per_passage) {
  ParseResult result;
  for (std::string_view stop : {std::string_view(style.eos_marker),
                                std::string_view(style.text_marker)}) {
    if (auto pos = raw.find(stop); pos != std::string_view::npos) raw = raw.substr(0, pos);
  }
  raw = utf8::trim(raw);
  if (raw.starts_with(style.question_marker)) raw.remove_prefix(style.question_marker.size());
  if (utf8::trim(raw).empty()) return result;

  std::vector<std::string_view> fragments;
  for (std::size_t start = 0;;) {
    const std::size_t at = raw.find(style.question_marker, start);
    fragments.push_back(raw.substr(start, at == std::string_view::npos ? raw.npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + style.question_marker.size();
  }
  for (std::string_view fragment : fragments) {
    const std::size_t at = fragment.find(style.answer_marker);
    if (at == std::string_view::npos ||
        fragment.find(style.answer_marker, at + style.answer_marker.size()) !=
            std::string_view::npos) {
      ++result.report.malformed;
      continue;
    }
    const std::string_view q = utf8::trim(fragment.substr(0, at));
    const std::string_view a = utf8::trim(fragment.substr(at + style.answer_marker.size()));
    if (q.empty() || a.empty()) {
      ++result.report.malformed;
      continue;
    }
    if (static_cast<int>(result.pairs.size()) >= pairs_per_passage) {
      ++result.report.extra;
      continue;
    }
    result.pairs.push_back({std::string(q), std::string(a),
                            static_cast<int>(result.pairs.size())});
  }
  result.report.pairs = result.pairs.size();
  return result;
}

/// Inverse of parse_generation for well-formed pairs.
inline std::string render_pairs(const std::vector<QAPair>& pairs, const PromptStyle& style) {
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) out += style.question_marker;
    out += pairs[i].question + style.answer_marker + pairs[i].answer;
  }
  return out + style.eos_marker;
}

// ---------------------------------------------------------------------------
// Generator role

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string name() const = 0;
  /// Raw continuation of `prompt`. May throw ProviderError.
  virtual std::string generate(const std::string& prompt, const PromptStyle& style,
                               const GenParams& params) const = 0;
};

/// Offline generator. Builds questions and answers from the passage words
/// so runs are reproducible without a model; about one passage in five
/// gets a double-interrogative question and one in seven a duplicated pair,
/// which gives the filter something to reject.
class StubGenerator final : public Generator {
 public:
  std::string name() const override { return "stub"; }

  std::string generate(const std::string& prompt, const PromptStyle& style,
                       const GenParams& params) const override {
    std::string_view text = prompt;
    if (text.starts_with(style.text_marker)) text.remove_prefix(style.text_marker.size());
    if (text.ends_with(style.question_marker))
      text.remove_suffix(style.question_marker.size());
    std::vector<std::string> words;
    for (auto& t : tokenize(text)) words.push_back(std::move(t.surface));
    if (words.empty()) return style.eos_marker;
    const std::uint64_t h = fnv1a64(text);
    const std::size_t n = words.size();
    const auto word = [&](std::size_t i) -> const std::string& { return words[i % n]; };
    std::vector<QAPair> pairs;
    for (int k = 0; k < params.pairs_per_passage; ++k) {
      const std::size_t at = static_cast<std::size_t>(k) * 4 + h % 3;
      std::string question = "Что известно про " + word(at) + " " + word(at + 1) + "?";
      if (k == 2 && h % 5 == 0) question = "Кто и когда упоминал " + word(at) + "?";
      std::string answer = word(at + 2) + " " + word(at + 3);
      pairs.push_back({question, answer, k});
    }
    if (h % 7 == 0 && pairs.size() >= 2) pairs[1] = pairs[0];
    return render_pairs(pairs, style);
  }
};

// ---------------------------------------------------------------------------
// Ordered, resumable generation

/// Last completed passage id per batch.
struct Checkpoint {
  std::map<int, std::string> last_done;

  bool done(const Passage& p) const {
    auto it = last_done.find(p.batch);
    return it != last_done.end() && p.id <= it->second;
  }

  json to_json() const {
    json batches = json::object();
    for (const auto& [b, id] : last_done) batches[std::to_string(b)] = id;
    return json{{"batches", batches}};
  }

  static Checkpoint from_json(const json& j) {
    Checkpoint c;
    for (const auto& [b, id] : j.at("batches").items()) c.last_done[std::stoi(b)] = id.get<std::string>();
    return c;
  }
};

struct GenerateOptions {
  std::size_t workers = 1;
  int max_attempts = 3;
  // This many consecutive passages failing as unreachable abort the run.
  std::size_t abort_after_unavailable = 5;
  std::size_t chunk_size = 256;
  ModelTag model_tag = ModelTag::kStub;
};

struct GenerateReport {
  std::size_t passages = 0;
  std::size_t resumed_skip = 0;
  std::size_t triplets = 0;
  std::size_t malformed = 0;
  std::size_t extra = 0;
  std::vector<std::string> skipped;

  json to_json() const {
    return json{{"passages", passages}, {"resumed_skip", resumed_skip},
                {"triplets", triplets}, {"malformed", malformed},
                {"extra", extra},       {"skipped", skipped}};
  }
};

/// Orders passages by (batch, id), the order every generated stream uses.
inline std::vector<const Passage*> generation_order(const std::vector<Passage>& passages) {
  std::vector<const Passage*> order;
  order.reserve(passages.size());
  for (const auto& p : passages) order.push_back(&p);
  std::sort(order.begin(), order.end(), [](const Passage* a, const Passage* b) {
    return std::pair(a->batch, std::string_view(a->id)) <
           std::pair(b->batch, std::string_view(b->id));
  });
  return order;
}

/// Generates QA pairs for every passage not already covered by
/// `checkpoint`. Triplets reach `sink` in (batch, passage id, gen_index)
/// order whatever the worker count; `on_checkpoint` fires after each chunk
/// has been fully emitted. Persistent unavailability throws ProviderError
/// after emitting and checkpointing everything before the failing run.
inline GenerateReport generate_for_passages(
    const std::vector<Passage>& passages, const Generator& generator,
    const PromptStyle& style, const GenParams& params, const GenerateOptions& options,
    const std::function<void(const Triplet&)>& sink, Checkpoint& checkpoint,
    const std::function<void(const Checkpoint&)>& on_checkpoint = {}) {
  style.validate();
  params.validate();
  GenerateReport report;
  std::vector<const Passage*> todo;
  for (const Passage* p : generation_order(passages)) {
    if (checkpoint.done(*p)) {
      ++report.resumed_skip;
    } else {
      todo.push_back(p);
    }
  }

  struct Outcome {
    std::vector<QAPair> pairs;
    ParseReport parse;
    bool failed = false;
    bool unavailable = false;
    std::string error;
  };
  const auto run_one = [&](const Passage& p) {
    Outcome out;
    const std::string prompt = format_prompt(p, style);
    const int calls = params.one_pass ? 1 : params.pairs_per_passage;
    for (int call = 0; call < calls; ++call) {
      std::optional<std::string> raw;
      for (int attempt = 1; attempt <= options.max_attempts && !raw; ++attempt) {
        try {
          raw = generator.generate(prompt, style, params);
        } catch (const ProviderError& e) {
          out.unavailable = e.kind() != ProviderError::Kind::kBadResponse;
          out.error = e.what();
        }
      }
      if (!raw) {
        out.failed = true;
        out.pairs.clear();
        return out;
      }
      out.unavailable = false;
      ParseResult parsed =
          parse_generation(*raw, style, params.one_pass ? params.pairs_per_passage : 1);
      out.parse.malformed += parsed.report.malformed;
      out.parse.extra += parsed.report.extra;
      for (auto& pair : parsed.pairs) {
        pair.gen_index = static_cast<int>(out.pairs.size());
        out.pairs.push_back(std::move(pair));
      }
    }
    return out;
  };

  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  const std::size_t chunk = std::max<std::size_t>(1, options.chunk_size);

  const auto commit = [&](const Passage& p, const Outcome& out) {
    ++report.passages;
    if (out.failed) {
      spdlog::warn("generate: passage '{}' skipped after {} attempts: {}", p.id,
                   options.max_attempts, out.error);
      report.skipped.push_back(p.id);
    }
    report.malformed += out.parse.malformed;
    report.extra += out.parse.extra;
    for (const auto& pair : out.pairs) {
      sink(Triplet{p.id, pair, options.model_tag, std::nullopt});
      ++report.triplets;
    }
    checkpoint.last_done[p.batch] = p.id;
  };

  // Passages that failed as unreachable are held back: the run either ends
  // (they become skips) or reaches the abort threshold (they stay undone so
  // a resumed run retries them). Failures emit no triplets, so holding them
  // never reorders output.
  std::vector<std::pair<const Passage*, Outcome>> pending;
  for (std::size_t begin = 0; begin < todo.size(); begin += chunk) {
    const std::size_t end = std::min(todo.size(), begin + chunk);
    std::vector<Outcome> outcomes(end - begin);
    std::atomic<std::size_t> next{begin};
    const auto work = [&] {
      for (std::size_t i = next++; i < end; i = next++) outcomes[i - begin] = run_one(*todo[i]);
    };
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < std::min(workers, end - begin); ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }

    for (std::size_t i = begin; i < end; ++i) {
      Outcome& out = outcomes[i - begin];
      if (out.failed && out.unavailable) {
        pending.emplace_back(todo[i], std::move(out));
        if (pending.size() >= options.abort_after_unavailable) {
          if (on_checkpoint) on_checkpoint(checkpoint);
          throw ProviderError(ProviderError::Kind::kUnavailable, generator.name(),
                              "unreachable for " + std::to_string(pending.size()) +
                                  " consecutive passages; stopped before passage '" +
                                  pending.front().first->id + "' (rerun with --resume)");
        }
        continue;
      }
      for (const auto& [held, held_out] : pending) commit(*held, held_out);
      pending.clear();
      commit(*todo[i], out);
    }
    if (on_checkpoint) on_checkpoint(checkpoint);
  }
  for (const auto& [held, held_out] : pending) commit(*held, held_out);
  if (!pending.empty() && on_checkpoint) on_checkpoint(checkpoint);
  return report;
}

}  // namespace qaforge
