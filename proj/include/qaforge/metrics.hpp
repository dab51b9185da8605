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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <spdlog/spdlog.h>

#include "qaforge/corpus_model.hpp"
#include "qaforge/error.hpp"
#include "qaforge/sampling.hpp"
#include "qaforge/textproc.hpp"

namespace qaforge {

// ---------------------------------------------------------------------------
// BLEU

enum class BleuSmoothing {
  kNone,
  // (matches + 1) / (total + 1) for every order above unigrams.
  kAddOneHighOrder,
};

struct BleuConfig {
  int max_n = 4;
  BleuSmoothing smoothing = BleuSmoothing::kAddOneHighOrder;
};

namespace detail {

// Reference length closest to `hyp_len`; ties go to the shorter reference.
inline std::size_t closest_length(std::size_t hyp_len,
                                  const std::vector<std::size_t>& ref_lens) {
  std::size_t best = ref_lens.front();
  for (std::size_t r : ref_lens) {
    const auto d = [hyp_len](std::size_t x) {
      return x > hyp_len ? x - hyp_len : hyp_len - x;
    };
    if (d(r) < d(best) || (d(r) == d(best) && r < best)) best = r;
  }
  return best;
}

inline double brevity_penalty(std::size_t hyp_len, std::size_t ref_len) {
  if (hyp_len == 0) return 0.0;
  if (hyp_len > ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
}

// Combines per-order clipped match counts and totals into the BLEU value.
inline double combine_bleu(std::span<const std::size_t> matched,
                           std::span<const std::size_t> total, double bp,
                           const BleuConfig& config) {
  double log_sum = 0.0;
  for (std::size_t k = 0; k < matched.size(); ++k) {
    double m = static_cast<double>(matched[k]);
    double t = static_cast<double>(total[k]);
    if (k > 0 && config.smoothing == BleuSmoothing::kAddOneHighOrder) {
      m += 1.0;
      t += 1.0;
    }
    if (m <= 0.0 || t <= 0.0) return 0.0;
    log_sum += std::log(m / t);
  }
  return bp * std::exp(log_sum / static_cast<double>(matched.size()));
}

// True when every n-gram over `base` token ids fits one 64-bit key.
inline bool packable(std::uint64_t base, std::size_t n) {
  std::uint64_t p = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (base != 0 && p > std::numeric_limits<std::uint64_t>::max() / base) return false;
    p *= base;
  }
  return true;
}

// Sorted n-gram keys, each the base-`base` number formed by its ids.
inline std::vector<std::uint64_t> packed_ngrams(const std::vector<std::uint32_t>& ids,
                                                std::size_t n, std::uint64_t base) {
  std::vector<std::uint64_t> out;
  if (ids.size() < n) return out;
  out.reserve(ids.size() - n + 1);
  for (std::size_t i = 0; i + n <= ids.size(); ++i) {
    std::uint64_t key = 0;
    for (std::size_t j = 0; j < n; ++j) key = key * base + ids[i + j];
    out.push_back(key);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Sentence BLEU of `hypothesis` against `references`: geometric mean of
/// clipped n-gram precisions for n = 1..max_n, times the brevity penalty
/// against the closest reference length.
inline double bleu(std::span<const std::string> hypothesis,
                   const std::vector<std::vector<std::string>>& references,
                   const BleuConfig& config = {}) {
  if (config.max_n < 1) throw ValidationError("bleu: max_n must be >= 1");
  if (hypothesis.empty()) {
    spdlog::warn("bleu: empty hypothesis scored as 0");
    return 0.0;
  }
  if (references.empty()) return 0.0;
  const auto n_max = static_cast<std::size_t>(config.max_n);
  std::vector<std::size_t> matched(n_max, 0), total(n_max, 0);

  std::unordered_map<std::string_view, std::uint32_t> vocab;
  const auto intern = [&vocab](std::span<const std::string> words) {
    std::vector<std::uint32_t> ids;
    ids.reserve(words.size());
    for (const auto& w : words)
      ids.push_back(vocab.emplace(w, static_cast<std::uint32_t>(vocab.size())).first->second);
    return ids;
  };
  const auto hyp_ids = intern(hypothesis);
  std::vector<std::vector<std::uint32_t>> ref_ids;
  ref_ids.reserve(references.size());
  for (const auto& ref : references) ref_ids.push_back(intern(ref));
  const std::uint64_t base = vocab.size();

  for (std::size_t n = 1; n <= n_max; ++n) {
    total[n - 1] = hypothesis.size() >= n ? hypothesis.size() - n + 1 : 0;
    if (detail::packable(base, n)) {
      const auto hyp_keys = detail::packed_ngrams(hyp_ids, n, base);
      std::vector<std::vector<std::uint64_t>> ref_keys;
      ref_keys.reserve(ref_ids.size());
      for (const auto& r : ref_ids) ref_keys.push_back(detail::packed_ngrams(r, n, base));
      for (std::size_t i = 0; i < hyp_keys.size();) {
        std::size_t j = i;
        while (j < hyp_keys.size() && hyp_keys[j] == hyp_keys[i]) ++j;
        std::size_t ref_max = 0;
        for (const auto& rk : ref_keys) {
          const auto [lo, hi] = std::equal_range(rk.begin(), rk.end(), hyp_keys[i]);
          ref_max = std::max(ref_max, static_cast<std::size_t>(hi - lo));
        }
        matched[n - 1] += std::min(j - i, ref_max);
        i = j;
      }
    } else {
      const auto hyp_counts = ngrams<std::string>(hypothesis, n);
      NgramCounts<std::string> max_ref;
      for (const auto& ref : references) {
        for (const auto& [gram, c] : ngrams<std::string>(ref, n)) {
          auto& slot = max_ref[gram];
          slot = std::max(slot, c);
        }
      }
      for (const auto& [gram, c] : hyp_counts) {
        auto it = max_ref.find(gram);
        if (it != max_ref.end()) matched[n - 1] += std::min(c, it->second);
      }
    }
    if (matched[n - 1] == 0 && (n == 1 || config.smoothing == BleuSmoothing::kNone)) return 0.0;
  }
  std::vector<std::size_t> ref_lens;
  for (const auto& ref : references) ref_lens.push_back(ref.size());
  const double bp = detail::brevity_penalty(
      hypothesis.size(), detail::closest_length(hypothesis.size(), ref_lens));
  return detail::combine_bleu(matched, total, bp, config);
}

// ---------------------------------------------------------------------------
// Self-BLEU

struct SelfBleuOptions {
  std::size_t sample_size = 5000;
  std::uint64_t seed = 0;
  BleuConfig bleu{4, BleuSmoothing::kAddOneHighOrder};
  std::size_t workers = 1;
};

/// BLEU of each tokenized sentence against all the others as references.
/// Uses per-n-gram top-two reference counts, so each hypothesis costs
/// O(length) instead of O(corpus); results equal calling bleu() with the
/// other sentences as references.
inline std::vector<double> self_bleu_scores(
    const std::vector<std::vector<std::string>>& sentences,
    const BleuConfig& config, std::size_t workers = 1) {
  const std::size_t count = sentences.size();
  if (count < 2) throw ValidationError("self_bleu needs at least 2 sentences");
  if (config.max_n < 1) throw ValidationError("bleu: max_n must be >= 1");
  const auto n_max = static_cast<std::size_t>(config.max_n);

  // Intern tokens so n-gram keys are short byte strings.
  std::unordered_map<std::string, std::uint32_t> vocab;
  std::vector<std::vector<std::uint32_t>> ids(count);
  for (std::size_t s = 0; s < count; ++s) {
    for (const auto& tok : sentences[s]) {
      auto [it, inserted] = vocab.emplace(tok, static_cast<std::uint32_t>(vocab.size()));
      ids[s].push_back(it->second);
    }
  }
  const auto key_of = [](const std::vector<std::uint32_t>& v, std::size_t i, std::size_t n) {
    return std::string(reinterpret_cast<const char*>(v.data() + i), n * sizeof(std::uint32_t));
  };
  const auto counts_of = [&](std::size_t s, std::size_t n) {
    std::unordered_map<std::string, std::size_t> c;
    if (ids[s].size() >= n) {
      for (std::size_t i = 0; i + n <= ids[s].size(); ++i) ++c[key_of(ids[s], i, n)];
    }
    return c;
  };

  struct TopTwo {
    std::size_t best = 0;
    std::size_t holder = SIZE_MAX;
    std::size_t second = 0;
  };
  std::vector<std::unordered_map<std::string, TopTwo>> tops(n_max);
  for (std::size_t n = 1; n <= n_max; ++n) {
    for (std::size_t s = 0; s < count; ++s) {
      for (const auto& [key, c] : counts_of(s, n)) {
        TopTwo& t = tops[n - 1][key];
        if (c > t.best) {
          t.second = t.best;
          t.best = c;
          t.holder = s;
        } else if (c > t.second) {
          t.second = c;
        }
      }
    }
  }
  std::map<std::size_t, std::size_t> length_hist;
  for (const auto& v : ids) ++length_hist[v.size()];

  std::vector<double> scores(count, 0.0);
  const auto score_one = [&](std::size_t s) {
    const std::size_t len = ids[s].size();
    if (len == 0) return 0.0;
    std::vector<std::size_t> matched(n_max, 0), total(n_max, 0);
    for (std::size_t n = 1; n <= n_max; ++n) {
      for (const auto& [key, c] : counts_of(s, n)) {
        const TopTwo& t = tops[n - 1].at(key);
        const std::size_t ref_max = t.holder == s ? t.second : t.best;
        matched[n - 1] += std::min(c, ref_max);
      }
      total[n - 1] = len >= n ? len - n + 1 : 0;
    }
    // Closest other-sentence length; ties to the shorter one.
    std::optional<std::size_t> best;
    for (const auto& [l, c] : length_hist) {
      if (c - (l == len ? 1 : 0) == 0) continue;
      const auto d = [len](std::size_t x) { return x > len ? x - len : len - x; };
      if (!best || d(l) < d(*best)) best = l;
    }
    return detail::combine_bleu(matched, total, detail::brevity_penalty(len, *best), config);
  };

  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t s = 0; s < count; ++s) scores[s] = score_one(s);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < count; s += workers) scores[s] = score_one(s);
      });
    }
    for (auto& t : pool) t.join();
  }
  return scores;
}

inline double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return (values[mid - 1] + values[mid]) / 2.0;
}

/// Median Self-BLEU over a seeded sample of min(sample_size, N) questions,
/// lemmatized first. Lower means more diverse.
inline double self_bleu(const std::vector<std::string>& questions,
                        const Lemmatizer* lemmatizer,
                        const SelfBleuOptions& options = {}) {
  if (questions.size() < 2) throw ValidationError("self_bleu needs at least 2 questions");
  const std::size_t k = std::min(options.sample_size, questions.size());
  if (k < 2) throw ValidationError("self_bleu sample size must be at least 2");
  std::vector<std::size_t> picked = sample_indices(questions.size(), k, options.seed);
  std::sort(picked.begin(), picked.end());
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(k);
  for (std::size_t i : picked) sentences.push_back(lemmas_of(questions[i], lemmatizer));
  return median(self_bleu_scores(sentences, options.bleu, options.workers));
}

// ---------------------------------------------------------------------------
// ROUGE-L

template <typename T>
std::size_t lcs_length(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// LCS-based F1 (beta = 1). `reference` gives recall, `candidate` precision.
inline double rouge_l(std::span<const std::string> reference,
                      std::span<const std::string> candidate) {
  if (reference.empty() && candidate.empty()) {
    spdlog::warn("rouge_l: both sequences empty, scored as 0");
    return 0.0;
  }
  if (reference.empty() || candidate.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length<std::string>(reference, candidate));
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(candidate.size());
  const double recall = lcs / static_cast<double>(reference.size());
  return 2.0 * precision * recall / (precision + recall);
}

// ---------------------------------------------------------------------------
// METEOR-lite: exact then lemma matching, no synonym or paraphrase stages.

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

struct MeteorAlignment {
  // (hypothesis index, reference index), sorted by hypothesis index.
  std::vector<std::pair<std::size_t, std::size_t>> links;
  std::size_t chunks = 0;
};

/// Greedy monotone-preferring alignment. Each stage links every unmatched
/// hypothesis token to an unmatched reference token with an equal key,
/// preferring the slot right after the previous token's link so runs stay
/// contiguous, otherwise the leftmost candidate.
inline MeteorAlignment meteor_align(std::span<const Token> hypothesis,
                                    std::span<const Token> reference) {
  std::vector<std::optional<std::size_t>> hyp_link(hypothesis.size());
  std::vector<bool> ref_used(reference.size(), false);
  const auto run_stage = [&](auto key) {
    for (std::size_t i = 0; i < hypothesis.size(); ++i) {
      if (hyp_link[i]) continue;
      std::optional<std::size_t> choice;
      if (i > 0 && hyp_link[i - 1]) {
        const std::size_t next = *hyp_link[i - 1] + 1;
        if (next < reference.size() && !ref_used[next] &&
            key(reference[next]) == key(hypothesis[i])) {
          choice = next;
        }
      }
      for (std::size_t j = 0; !choice && j < reference.size(); ++j) {
        if (!ref_used[j] && key(reference[j]) == key(hypothesis[i])) choice = j;
      }
      if (choice) {
        hyp_link[i] = choice;
        ref_used[*choice] = true;
      }
    }
  };
  run_stage([](const Token& t) { return utf8::to_lower(t.surface); });
  run_stage([](const Token& t) {
    return t.lemma.empty() ? utf8::to_lower(t.surface) : t.lemma;
  });

  MeteorAlignment out;
  for (std::size_t i = 0; i < hypothesis.size(); ++i) {
    if (hyp_link[i]) out.links.emplace_back(i, *hyp_link[i]);
  }
  for (std::size_t k = 0; k < out.links.size(); ++k) {
    if (k == 0 || out.links[k].first != out.links[k - 1].first + 1 ||
        out.links[k].second != out.links[k - 1].second + 1) {
      ++out.chunks;
    }
  }
  return out;
}

/// METEOR with recall-weighted harmonic mean and fragmentation penalty.
/// A complete single-chunk alignment of equal-length sequences has zero
/// fragmentation, so identical inputs score exactly 1.
inline double meteor_lite(std::span<const Token> hypothesis,
                          std::span<const Token> reference,
                          const MeteorParams& params = {}) {
  if (hypothesis.empty() && reference.empty()) {
    spdlog::warn("meteor_lite: both sequences empty, scored as 0");
    return 0.0;
  }
  if (hypothesis.empty() || reference.empty()) return 0.0;
  const MeteorAlignment alignment = meteor_align(hypothesis, reference);
  const auto m = static_cast<double>(alignment.links.size());
  if (m == 0.0) return 0.0;
  const double precision = m / static_cast<double>(hypothesis.size());
  const double recall = m / static_cast<double>(reference.size());
  const double fmean =
      precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
  const bool complete = alignment.links.size() == hypothesis.size() &&
                        alignment.links.size() == reference.size();
  const double frag = (complete && alignment.chunks == 1)
                          ? 0.0
                          : static_cast<double>(alignment.chunks) / m;
  const double penalty = params.gamma * std::pow(frag, params.beta);
  return fmean * (1.0 - penalty);
}

/// Convenience overload over plain strings (lemma = surface).
inline double meteor_lite(std::span<const std::string> hypothesis,
                          std::span<const std::string> reference,
                          const MeteorParams& params = {}) {
  const auto wrap = [](std::span<const std::string> words) {
    std::vector<Token> tokens;
    tokens.reserve(words.size());
    for (const auto& w : words) tokens.push_back({w, w, 0, 0});
    return tokens;
  };
  const auto h = wrap(hypothesis);
  const auto r = wrap(reference);
  return meteor_lite(std::span<const Token>(h), std::span<const Token>(r), params);
}

// ---------------------------------------------------------------------------
// Lemma overlap

inline double set_overlap(const std::set<std::string>& generated,
                          const std::set<std::string>& gold, OverlapMode mode) {
  std::size_t common = 0;
  for (const auto& l : generated) common += gold.count(l);
  std::size_t denom = 0;
  switch (mode) {
    case OverlapMode::kJaccard: denom = generated.size() + gold.size() - common; break;
    case OverlapMode::kOverGenerated: denom = generated.size(); break;
    case OverlapMode::kOverGold: denom = gold.size(); break;
  }
  if (denom == 0) return 0.0;
  return static_cast<double>(common) / static_cast<double>(denom);
}

/// Overlap between the lemma sets of two answers. `answer_a` is the
/// generated answer, `answer_b` the gold one.
inline double lemma_overlap(std::string_view answer_a, std::string_view answer_b,
                            OverlapMode mode, const Lemmatizer* lemmatizer) {
  const auto la = lemmas_of(answer_a, lemmatizer);
  const auto lb = lemmas_of(answer_b, lemmatizer);
  return set_overlap({la.begin(), la.end()}, {lb.begin(), lb.end()}, mode);
}

// ---------------------------------------------------------------------------
// SQuAD EM / F1

struct EmF1 {
  double em = 0.0;
  double f1 = 0.0;
};

/// Lowercase, delete punctuation and symbols, drop article words, collapse
/// whitespace. Russian has no articles, so the default list is empty.
inline std::string normalize_answer(std::string_view s,
                                    const std::set<std::string>& articles = {}) {
  std::string stripped;
  stripped.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) {
    const char32_t c = utf8::to_lower(utf8::decode_next(s, pos));
    if (utf8::is_word_char(c)) {
      utf8::append(stripped, c);
    } else if (utf8::is_space(c)) {
      stripped.push_back(' ');
    }
  }
  std::string out;
  std::size_t i = 0;
  while (i < stripped.size()) {
    while (i < stripped.size() && stripped[i] == ' ') ++i;
    std::size_t j = i;
    while (j < stripped.size() && stripped[j] != ' ') ++j;
    if (j > i) {
      std::string word = stripped.substr(i, j - i);
      if (!articles.count(word)) {
        if (!out.empty()) out.push_back(' ');
        out += word;
      }
    }
    i = j;
  }
  return out;
}

inline std::vector<std::string> split_spaces(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Token-bag F1 between two normalized strings. When either side has no
/// tokens, F1 is 1 if both are empty and 0 otherwise.
inline double token_f1(std::string_view prediction, std::string_view gold) {
  const auto p = split_spaces(prediction);
  const auto g = split_spaces(gold);
  if (p.empty() || g.empty()) return p.empty() && g.empty() ? 1.0 : 0.0;
  std::map<std::string, std::size_t> bag;
  for (const auto& w : g) ++bag[w];
  std::size_t common = 0;
  for (const auto& w : p) {
    auto it = bag.find(w);
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

/// EM and F1 of one prediction against its gold answers (max over golds).
inline EmF1 squad_em_f1(std::string_view prediction,
                        const std::vector<std::string>& golds) {
  if (golds.empty()) throw ValidationError("squad_em_f1 needs at least one gold answer");
  const std::string pred = normalize_answer(prediction);
  EmF1 out;
  for (const auto& gold : golds) {
    const std::string g = normalize_answer(gold);
    out.em = std::max(out.em, pred == g ? 1.0 : 0.0);
    out.f1 = std::max(out.f1, token_f1(pred, g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Word mover's distance

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string name() const = 0;
  /// One entry per word; std::nullopt for out-of-vocabulary words.
  virtual std::vector<std::optional<std::vector<double>>> embed(
      const std::vector<std::string>& words) const = 0;
};

/// Fixed word -> vector table.
class TableEmbedder final : public Embedder {
 public:
  explicit TableEmbedder(std::map<std::string, std::vector<double>> table)
      : table_(std::move(table)) {}
  std::string name() const override { return "table"; }
  std::vector<std::optional<std::vector<double>>> embed(
      const std::vector<std::string>& words) const override {
    std::vector<std::optional<std::vector<double>>> out;
    for (const auto& w : words) {
      auto it = table_.find(w);
      if (it == table_.end()) {
        out.emplace_back(std::nullopt);
      } else {
        out.emplace_back(it->second);
      }
    }
    return out;
  }

 private:
  std::map<std::string, std::vector<double>> table_;
};

/// Deterministic pseudo-embeddings seeded by the word hash. Offline stand-in
/// for a real embedding model; every word is in vocabulary.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = 16) : dim_(dim) {}
  std::string name() const override { return "hash"; }
  std::vector<std::optional<std::vector<double>>> embed(
      const std::vector<std::string>& words) const override {
    std::vector<std::optional<std::vector<double>>> out;
    for (const auto& w : words) {
      std::mt19937_64 rng(fnv1a64(w));
      std::vector<double> v(dim_);
      for (auto& x : v) x = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
      out.emplace_back(std::move(v));
    }
    return out;
  }

 private:
  std::size_t dim_;
};

/// Minimum-cost transport between `supply` and `demand` (each summing to the
/// same total) under `cost` (row-major supply x demand), by successive
/// shortest augmenting paths on the residual graph.
inline double min_cost_transport(std::span<const double> supply,
                                 std::span<const double> demand,
                                 std::span<const double> cost) {
  const std::size_t m = supply.size(), n = demand.size();
  const std::size_t nodes = m + n + 2, source = m + n, sink = m + n + 1;
  struct Edge {
    std::size_t to;
    double cap;
    double cost;
    std::size_t rev;
  };
  std::vector<std::vector<Edge>> graph(nodes);
  const auto add_edge = [&](std::size_t u, std::size_t v, double cap, double c) {
    graph[u].push_back({v, cap, c, graph[v].size()});
    graph[v].push_back({u, 0.0, -c, graph[u].size() - 1});
  };
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    add_edge(source, i, supply[i], 0.0);
    total += supply[i];
  }
  for (std::size_t j = 0; j < n; ++j) add_edge(m + j, sink, demand[j], 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      add_edge(i, m + j, std::numeric_limits<double>::infinity(), cost[i * n + j]);

  constexpr double kEps = 1e-15;
  double flow = 0.0, result = 0.0;
  const std::size_t max_rounds = 4 * nodes * nodes + 64;
  for (std::size_t round = 0; round < max_rounds && flow < total - 1e-12; ++round) {
    // Bellman-Ford: residual graph has negative reverse-edge costs.
    std::vector<double> dist(nodes, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> prev_node(nodes, SIZE_MAX), prev_edge(nodes, SIZE_MAX);
    dist[source] = 0.0;
    for (std::size_t it = 0; it + 1 < nodes; ++it) {
      bool changed = false;
      for (std::size_t u = 0; u < nodes; ++u) {
        if (dist[u] == std::numeric_limits<double>::infinity()) continue;
        for (std::size_t e = 0; e < graph[u].size(); ++e) {
          const Edge& edge = graph[u][e];
          if (edge.cap > kEps && dist[u] + edge.cost < dist[edge.to] - 1e-15) {
            dist[edge.to] = dist[u] + edge.cost;
            prev_node[edge.to] = u;
            prev_edge[edge.to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (prev_node[sink] == SIZE_MAX) break;
    double push = total - flow;
    for (std::size_t v = sink; v != source; v = prev_node[v])
      push = std::min(push, graph[prev_node[v]][prev_edge[v]].cap);
    for (std::size_t v = sink; v != source; v = prev_node[v]) {
      Edge& edge = graph[prev_node[v]][prev_edge[v]];
      edge.cap -= push;
      graph[v][edge.rev].cap += push;
    }
    flow += push;
    result += push * dist[sink];
  }
  return result;
}

/// Word mover's distance between normalized bag-of-words distributions
/// under Euclidean word-vector distance. Out-of-vocabulary words are
/// dropped; a side with no known words makes the distance undefined.
inline double word_movers_distance(std::span<const std::string> a,
                                   std::span<const std::string> b,
                                   const Embedder& embedder) {
  const auto bag = [&embedder](std::span<const std::string> words, const char* side) {
    std::map<std::string, double> counts;
    for (const auto& w : words) counts[w] += 1.0;
    std::vector<std::string> vocab;
    for (const auto& [w, c] : counts) vocab.push_back(w);
    const auto vectors = embedder.embed(vocab);
    if (vectors.size() != vocab.size())
      throw ProviderError(ProviderError::Kind::kBadResponse, embedder.name(),
                          "vector count does not match word count");
    std::vector<double> weights;
    std::vector<std::vector<double>> kept;
    double sum = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (!vectors[i]) {
        spdlog::warn("wmd: out-of-vocabulary word '{}' skipped", vocab[i]);
        continue;
      }
      weights.push_back(counts[vocab[i]]);
      kept.push_back(*vectors[i]);
      sum += counts[vocab[i]];
    }
    if (kept.empty())
      throw ValidationError(std::string("wmd undefined: no known words on the ") + side + " side");
    for (auto& w : weights) w /= sum;
    return std::pair(weights, kept);
  };
  const auto [wa, va] = bag(a, "first");
  const auto [wb, vb] = bag(b, "second");
  std::vector<double> cost(wa.size() * wb.size());
  for (std::size_t i = 0; i < wa.size(); ++i) {
    for (std::size_t j = 0; j < wb.size(); ++j) {
      if (va[i].size() != vb[j].size())
        throw ProviderError(ProviderError::Kind::kBadResponse, embedder.name(),
                            "inconsistent vector dimensions");
      double d2 = 0.0;
      for (std::size_t k = 0; k < va[i].size(); ++k) {
        const double d = va[i][k] - vb[j][k];
        d2 += d * d;
      }
      cost[i * wb.size() + j] = std::sqrt(d2);
    }
  }
  return std::max(0.0, min_cost_transport(wa, wb, cost));
}

}  // namespace qaforge
