#pragma once

// Straight-line reference implementations used only as test oracles. They
// favour obviousness over speed: n-grams are joined strings, LCS and unigram
// alignments are found by exhaustive enumeration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

inline std::vector<std::string> ngrams(const Tokens& t, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    std::string g;
    for (std::size_t k = 0; k < n; ++k) g += t[i + k] + '\x1f';
    out.push_back(g);
  }
  return out;
}

inline std::size_t count_of(const std::vector<std::string>& xs, const std::string& x) {
  return static_cast<std::size_t>(std::count(xs.begin(), xs.end(), x));
}

/// Corpus BLEU with the closest reference length (shorter on ties).
inline double bleu(const std::vector<Tokens>& cands, const std::vector<std::vector<Tokens>>& refs, int n) {
  std::vector<double> match(n, 0.0), total(n, 0.0);
  double c = 0.0, r = 0.0;
  for (std::size_t p = 0; p < cands.size(); ++p) {
    const Tokens& cand = cands[p];
    std::vector<std::size_t> lens;
    for (const auto& ref : refs[p]) lens.push_back(ref.size());
    std::sort(lens.begin(), lens.end());
    std::size_t closest = lens[0];
    for (std::size_t L : lens) {
      const double d = std::fabs(double(L) - double(cand.size()));
      if (d < std::fabs(double(closest) - double(cand.size()))) closest = L;
    }
    r += double(closest);
    if (cand.empty()) continue;
    c += double(cand.size());
    for (int k = 1; k <= n; ++k) {
      const auto cg = ngrams(cand, k);
      std::set<std::string> distinct(cg.begin(), cg.end());
      for (const auto& g : distinct) {
        std::size_t max_ref = 0;
        for (const auto& ref : refs[p]) max_ref = std::max(max_ref, count_of(ngrams(ref, k), g));
        match[k - 1] += double(std::min(count_of(cg, g), max_ref));
      }
      total[k - 1] += double(cg.size());
    }
  }
  if (c == 0.0) return 0.0;
  double prod = 1.0;
  for (int k = 0; k < n; ++k) {
    if (match[k] == 0.0) return 0.0;
    prod *= match[k] / total[k];
  }
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::pow(prod, 1.0 / n);
}

inline bool is_subsequence(const Tokens& sub, const Tokens& seq) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < seq.size() && j < sub.size(); ++i)
    if (seq[i] == sub[j]) ++j;
  return j == sub.size();
}

/// LCS by enumerating every subsequence of `a` (|a| <= 20).
inline std::size_t lcs(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
    Tokens sub;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (1u << i)) sub.push_back(a[i]);
    if (sub.size() > best && is_subsequence(sub, b)) best = sub.size();
  }
  return best;
}

inline double rouge_l(const Tokens& cand, const std::vector<Tokens>& refs, double beta = 1.2) {
  if (cand.empty()) return 0.0;
  double p = 0.0, r = 0.0;
  for (const auto& ref : refs) {
    if (ref.empty()) continue;
    const double l = double(lcs(cand, ref));
    p = std::max(p, l / double(cand.size()));
    r = std::max(r, l / double(ref.size()));
  }
  if (p == 0.0 || r == 0.0) return 0.0;
  return (1 + beta * beta) * p * r / (r + beta * beta * p);
}

/// Plain CIDEr: idf = log(sets / (1 + df)), df counted per reference set.
struct Cider {
  std::map<std::string, double> df;
  double sets = 0.0;

  explicit Cider(const std::vector<std::vector<Tokens>>& ref_sets) : sets(double(ref_sets.size())) {
    for (const auto& set : ref_sets) {
      std::set<std::string> seen;
      for (const auto& ref : set)
        for (std::size_t n = 1; n <= 4; ++n)
          for (const auto& g : ngrams(ref, n)) seen.insert(g);
      for (const auto& g : seen) df[g] += 1.0;
    }
  }

  std::map<std::string, double> vec(const Tokens& t, std::size_t n) const {
    std::map<std::string, double> v;
    for (const auto& g : ngrams(t, n)) v[g] += 1.0;
    for (auto& [g, x] : v) {
      auto it = df.find(g);
      x *= std::log(sets / (1.0 + (it == df.end() ? 0.0 : it->second)));
    }
    return v;
  }

  double score(const Tokens& cand, const std::vector<Tokens>& refs) const {
    double sum_n = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto vc = vec(cand, n);
      double sum_r = 0.0;
      for (const auto& ref : refs) {
        const auto vr = vec(ref, n);
        double dot = 0.0, nc = 0.0, nr = 0.0;
        for (const auto& [g, x] : vc) {
          nc += x * x;
          if (vr.count(g)) dot += x * vr.at(g);
        }
        for (const auto& [g, x] : vr) nr += x * x;
        if (nc > 0.0 && nr > 0.0) sum_r += dot / (std::sqrt(nc) * std::sqrt(nr));
      }
      sum_n += sum_r / double(refs.size());
    }
    return 10.0 * sum_n / 4.0;
  }
};

struct Align {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

/// Every partial injective map from candidate positions to equal reference
/// tokens; keeps the most matches, then the fewest chunks.
inline Align align(const Tokens& cand, const Tokens& ref) {
  Align best;
  best.chunks = std::numeric_limits<std::size_t>::max();
  std::vector<int> to(cand.size(), -1);
  std::vector<bool> used(ref.size(), false);
  auto evaluate = [&] {
    std::size_t m = 0, ch = 0;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (to[i] < 0) continue;
      ++m;
      const bool continues = i > 0 && to[i - 1] >= 0 && to[i] == to[i - 1] + 1;
      if (!continues) ++ch;
    }
    if (m > best.matches || (m == best.matches && ch < best.chunks)) best = {m, ch};
  };
  auto rec = [&](auto&& self, std::size_t i) -> void {
    if (i == cand.size()) {
      evaluate();
      return;
    }
    self(self, i + 1);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (used[j] || ref[j] != cand[i]) continue;
      used[j] = true;
      to[i] = int(j);
      self(self, i + 1);
      to[i] = -1;
      used[j] = false;
    }
  };
  rec(rec, 0);
  if (best.matches == 0) best.chunks = 0;
  return best;
}

inline double meteor_lite(const Tokens& cand, const std::vector<Tokens>& refs) {
  double best = 0.0;
  for (const auto& ref : refs) {
    const Align a = align(cand, ref);
    if (a.matches == 0) continue;
    const double P = double(a.matches) / double(cand.size());
    const double R = double(a.matches) / double(ref.size());
    const double f = 10 * P * R / (R + 9 * P);
    const double pen = 0.5 * std::pow(double(a.chunks) / double(a.matches), 3.0);
    best = std::max(best, f * (1 - pen));
  }
  return best;
}

}  // namespace oracle
