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

// Brute-force reference implementations. Deliberately naive and written
// without reusing anything from the library's metric code paths.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace qaforge::oracle {

using Words = std::vector<std::string>;

/// Plain recursive edit distance (exponential; fine for length <= 6).
template <typename Seq>
std::size_t naive_edit_distance(const Seq& a, const Seq& b, std::size_t i = 0,
                                std::size_t j = 0) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  if (a[i] == b[j]) {
    // Matching heads: still consider all three moves to stay fully naive.
    return std::min({naive_edit_distance(a, b, i + 1, j + 1),
                     1 + naive_edit_distance(a, b, i + 1, j),
                     1 + naive_edit_distance(a, b, i, j + 1)});
  }
  return 1 + std::min({naive_edit_distance(a, b, i + 1, j + 1),
                       naive_edit_distance(a, b, i + 1, j),
                       naive_edit_distance(a, b, i, j + 1)});
}

template <typename Seq>
double naive_similarity(const Seq& a, const Seq& b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(naive_edit_distance(a, b)) / longest;
}

/// The same recursive definition with a memo table over (i, j).
template <typename Seq>
std::size_t memo_edit_distance(const Seq& a, const Seq& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    long& m = memo[i][j];
    if (m >= 0) return static_cast<std::size_t>(m);
    const std::size_t sub = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    const std::size_t r = std::min({sub, 1 + go(i + 1, j), 1 + go(i, j + 1)});
    m = static_cast<long>(r);
    return r;
  };
  return go(0, 0);
}

template <typename Seq>
double memo_similarity(const Seq& a, const Seq& b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(memo_edit_distance(a, b)) / longest;
}

/// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t naive_lcs(const Words& a, const Words& b) {
  std::size_t best = 0;
  const std::size_t masks = std::size_t{1} << a.size();
  for (std::size_t mask = 0; mask < masks; ++mask) {
    // Is the masked subsequence of a also a subsequence of b?
    std::size_t i = 0, len = 0, j = 0;
    bool ok = true;
    for (; i < a.size(); ++i) {
      if (!(mask & (std::size_t{1} << i))) continue;
      ++len;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) {
        ok = false;
        break;
      }
      ++j;
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

inline double naive_rouge_l(const Words& ref, const Words& cand) {
  if (ref.empty() || cand.empty()) return 0.0;
  const double l = static_cast<double>(naive_lcs(ref, cand));
  if (l == 0) return 0.0;
  const double p = l / cand.size(), r = l / ref.size();
  return 2 * p * r / (p + r);
}

/// Unsmoothed sentence BLEU by listing every n-gram position and counting
/// occurrences with linear scans.
inline double naive_bleu(const Words& hyp, const std::vector<Words>& refs, int max_n) {
  if (hyp.empty() || refs.empty()) return 0.0;
  const auto count_in = [](const Words& seq, const Words& gram) {
    std::size_t c = 0;
    for (std::size_t i = 0; i + gram.size() <= seq.size(); ++i)
      if (std::equal(gram.begin(), gram.end(), seq.begin() + i)) ++c;
    return c;
  };
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    if (hyp.size() < static_cast<std::size_t>(n)) return 0.0;
    std::vector<Words> seen;
    double matched = 0, total = 0;
    for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
      total += 1;
      Words gram(hyp.begin() + i, hyp.begin() + i + n);
      if (std::find(seen.begin(), seen.end(), gram) != seen.end()) continue;
      seen.push_back(gram);
      std::size_t ref_max = 0;
      for (const auto& r : refs) ref_max = std::max(ref_max, count_in(r, gram));
      matched += std::min(count_in(hyp, gram), ref_max);
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(matched / total);
  }
  std::size_t r_best = refs[0].size();
  for (const auto& r : refs) {
    const long d = std::labs(static_cast<long>(r.size()) - static_cast<long>(hyp.size()));
    const long db = std::labs(static_cast<long>(r_best) - static_cast<long>(hyp.size()));
    if (d < db || (d == db && r.size() < r_best)) r_best = r.size();
  }
  const double c = hyp.size();
  const double bp = c > r_best ? 1.0 : std::exp(1.0 - r_best / c);
  return bp * std::exp(log_sum / max_n);
}

/// Set-overlap by explicit membership loops.
inline double naive_overlap(const Words& a, const Words& b, int mode) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::set<std::string> uni = sa;
  uni.insert(sb.begin(), sb.end());
  double inter = 0;
  for (const auto& x : uni)
    if (sa.count(x) && sb.count(x)) inter += 1;
  double denom = mode == 0 ? uni.size() : mode == 1 ? sa.size() : sb.size();
  return denom == 0 ? 0.0 : inter / denom;
}

/// Token-bag F1 by removing matched tokens from a copy of the gold list.
inline double naive_f1(const Words& pred, const Words& gold) {
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  Words remaining = gold;
  double common = 0;
  for (const auto& w : pred) {
    auto it = std::find(remaining.begin(), remaining.end(), w);
    if (it != remaining.end()) {
      remaining.erase(it);
      common += 1;
    }
  }
  if (common == 0) return 0.0;
  const double p = common / pred.size(), r = common / gold.size();
  return 2 * p * r / (p + r);
}

/// Optimal transport by enumerating every basic solution: each choice of
/// m+n-1 cells forming a spanning tree of the bipartite supply/demand graph
/// determines a unique plan; the optimum is the cheapest feasible one.
inline double enumerate_transport(const std::vector<double>& supply,
                                  const std::vector<double>& demand,
                                  const std::vector<std::vector<double>>& cost) {
  const std::size_t m = supply.size(), n = demand.size();
  const std::size_t cells = m * n, basis = m + n - 1;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(cells, 0);
  std::fill(pick.end() - static_cast<long>(basis), pick.end(), 1);
  do {
    std::vector<std::pair<std::size_t, std::size_t>> chosen;
    for (std::size_t c = 0; c < cells; ++c)
      if (pick[c]) chosen.emplace_back(c / n, c % n);
    // Solve flows by repeatedly peeling leaves of the chosen forest.
    std::vector<double> rs(supply), cs(demand);
    std::vector<bool> done(chosen.size(), false);
    std::vector<double> flow(chosen.size(), 0.0);
    bool progress = true;
    std::size_t solved = 0;
    while (progress && solved < chosen.size()) {
      progress = false;
      for (std::size_t k = 0; k < chosen.size(); ++k) {
        if (done[k]) continue;
        const auto [i, j] = chosen[k];
        std::size_t row_deg = 0, col_deg = 0;
        for (std::size_t q = 0; q < chosen.size(); ++q) {
          if (done[q]) continue;
          if (chosen[q].first == i) ++row_deg;
          if (chosen[q].second == j) ++col_deg;
        }
        if (row_deg == 1) {
          flow[k] = rs[i];
        } else if (col_deg == 1) {
          flow[k] = cs[j];
        } else {
          continue;
        }
        rs[i] -= flow[k];
        cs[j] -= flow[k];
        done[k] = true;
        ++solved;
        progress = true;
      }
    }
    if (solved < chosen.size()) continue;  // contains a cycle: not a basis
    bool feasible = true;
    for (double f : flow) feasible = feasible && f >= -1e-12;
    for (double r : rs) feasible = feasible && std::fabs(r) < 1e-12;
    for (double c : cs) feasible = feasible && std::fabs(c) < 1e-12;
    if (!feasible) continue;
    double total = 0.0;
    for (std::size_t k = 0; k < chosen.size(); ++k)
      total += flow[k] * cost[chosen[k].first][chosen[k].second];
    best = std::min(best, total);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

/// All strings over `alphabet` of length 0..max_len.
inline std::vector<Words> all_sequences(const Words& alphabet, std::size_t max_len) {
  std::vector<Words> out{{}};
  std::vector<Words> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<Words> next;
    for (const auto& w : frontier) {
      for (const auto& s : alphabet) {
        Words x = w;
        x.push_back(s);
        next.push_back(x);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

}  // namespace qaforge::oracle
