#include "foda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

#include "foda/error.hpp"
#include "foda/io.hpp"

namespace foda {

using nlohmann::json;

NgramCounts ngram_counts(std::span<const std::string> tokens, std::size_t n) {
  NgramCounts out;
  if (n == 0 || tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++out[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return out;
}

namespace {

/// Clipped matches and candidate n-gram total for one order.
std::pair<std::int64_t, std::int64_t> clipped(std::span<const std::string> cand,
                                              std::span<const TokenSequence> refs, std::size_t n) {
  const auto cc = ngram_counts(cand, n);
  NgramCounts max_ref;
  for (const auto& r : refs)
    for (const auto& [g, c] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
  std::int64_t match = 0, total = 0;
  for (const auto& [g, c] : cc) {
    total += c;
    if (auto it = max_ref.find(g); it != max_ref.end()) match += std::min(c, it->second);
  }
  return {match, total};
}

std::size_t closest_ref_length(std::size_t c, std::span<const TokenSequence> refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = r.size() > c ? r.size() - c : c - r.size();
    const auto bd = best > c ? best - c : c - best;
    if (d < bd || (d == bd && r.size() < best)) best = r.size();
  }
  return best;
}

double brevity_penalty(double c, double r) { return c < r ? std::exp(1.0 - r / c) : 1.0; }

}  // namespace

double bleu(std::span<const EvalPair> pairs, int n) {
  if (n < 1 || n > 4) throw ConfigError("bleu: order must be in 1..4");
  std::vector<std::int64_t> match(n, 0), total(n, 0);
  double c = 0.0, r = 0.0;
  for (const auto& p : pairs) {
    if (p.references.empty()) throw ConfigError("bleu: pair without references");
    if (p.candidate.empty()) {
      log_warning("bleu: empty candidate scored as zero");
      r += static_cast<double>(closest_ref_length(0, p.references));
      continue;
    }
    c += static_cast<double>(p.candidate.size());
    r += static_cast<double>(closest_ref_length(p.candidate.size(), p.references));
    for (int k = 0; k < n; ++k) {
      auto [m, t] = clipped(p.candidate, p.references, static_cast<std::size_t>(k + 1));
      match[k] += m;
      total[k] += t;
    }
  }
  if (c == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    if (match[k] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(match[k]) / static_cast<double>(total[k]));
  }
  return brevity_penalty(c, r) * std::exp(log_sum / n);
}

double sentence_bleu4(std::span<const std::string> candidate,
                      std::span<const TokenSequence> references) {
  if (references.empty()) throw ConfigError("sentence_bleu4: no references");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t k = 1; k <= 4; ++k) {
    auto [m, t] = clipped(candidate, references, k);
    if (k == 1) {
      if (m == 0) return 0.0;
      log_sum += std::log(static_cast<double>(m) / static_cast<double>(t));
    } else {
      log_sum += std::log(static_cast<double>(m + 1) / static_cast<double>(t + 1));
    }
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(closest_ref_length(candidate.size(), references));
  return brevity_penalty(c, r) * std::exp(log_sum / 4.0);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const EvalPair& pair, double beta) {
  if (pair.candidate.empty()) return 0.0;
  double p = 0.0, r = 0.0;
  for (const auto& ref : pair.references) {
    if (ref.empty()) continue;
    const double l = static_cast<double>(lcs_length(pair.candidate, ref));
    p = std::max(p, l / static_cast<double>(pair.candidate.size()));
    r = std::max(r, l / static_cast<double>(ref.size()));
  }
  if (p == 0.0 || r == 0.0) return 0.0;
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

CiderScorer::CiderScorer(std::span<const std::vector<TokenSequence>> reference_sets)
    : sets_(reference_sets.size()) {
  for (const auto& set : reference_sets) {
    std::set<std::vector<std::string>> seen;
    for (const auto& ref : set)
      for (std::size_t n = 1; n <= 4; ++n)
        for (const auto& [g, _] : ngram_counts(ref, n)) seen.insert(g);
    for (const auto& g : seen) df_[g] += 1.0;
  }
}

double CiderScorer::idf(const std::vector<std::string>& ngram) const {
  auto it = df_.find(ngram);
  const double df = it == df_.end() ? 0.0 : it->second;
  return std::log(static_cast<double>(sets_) / (1.0 + df));
}

double CiderScorer::score(std::span<const std::string> candidate,
                          std::span<const TokenSequence> references) const {
  if (references.empty()) throw ConfigError("cider: no references");
  auto weights = [&](std::span<const std::string> toks, std::size_t n) {
    std::map<std::vector<std::string>, double> v;
    for (const auto& [g, c] : ngram_counts(toks, n)) v[g] = static_cast<double>(c) * idf(g);
    return v;
  };
  auto norm = [](const std::map<std::vector<std::string>, double>& v) {
    double s = 0.0;
    for (const auto& [_, x] : v) s += x * x;
    return std::sqrt(s);
  };
  double total = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto vc = weights(candidate, n);
    const double nc = norm(vc);
    double acc = 0.0;
    for (const auto& ref : references) {
      const auto vr = weights(ref, n);
      const double nr = norm(vr);
      if (nc == 0.0 || nr == 0.0) continue;
      double dot = 0.0;
      for (const auto& [g, x] : vc)
        if (auto it = vr.find(g); it != vr.end()) dot += x * it->second;
      acc += dot / (nc * nr);
    }
    total += acc / static_cast<double>(references.size());
  }
  return 10.0 * total / 4.0;
}

double cider(std::span<const EvalPair> pairs, std::span<const std::vector<TokenSequence>> corpus_refs) {
  if (pairs.empty()) return 0.0;
  CiderScorer scorer(corpus_refs);
  double s = 0.0;
  for (const auto& p : pairs) s += scorer.score(p.candidate, p.references);
  return s / static_cast<double>(pairs.size());
}

namespace {

class ChunkSearch {
 public:
  ChunkSearch(std::span<const std::string> cand, std::span<const std::string> ref, std::size_t budget)
      : budget_(budget), used_(ref.size(), 0) {
    std::map<std::string, std::size_t> ids;
    auto id_of = [&](const std::string& w) { return ids.emplace(w, ids.size()).first->second; };
    for (const auto& w : cand) cand_.push_back(id_of(w));
    for (const auto& w : ref) ref_.push_back(id_of(w));
    std::vector<std::size_t> cc(ids.size(), 0), rc(ids.size(), 0);
    for (auto w : cand_) ++cc[w];
    for (auto w : ref_) ++rc[w];
    target_.resize(ids.size());
    matched_.assign(ids.size(), 0);
    for (std::size_t w = 0; w < ids.size(); ++w) {
      target_[w] = std::min(cc[w], rc[w]);
      total_ += target_[w];
    }
    // remaining_after_[i]: occurrences of cand_[i] at positions > i.
    remaining_after_.resize(cand_.size());
    std::vector<std::size_t> seen(ids.size(), 0);
    for (std::size_t i = cand_.size(); i-- > 0;) remaining_after_[i] = seen[cand_[i]]++;
  }

  Alignment run() {
    Alignment a;
    a.matches = total_;
    if (total_ == 0) return a;
    best_ = std::numeric_limits<std::size_t>::max();
    dfs(0, 0, kNone);
    a.chunks = best_ == std::numeric_limits<std::size_t>::max() ? total_ : best_;
    a.exact = !exhausted_;
    return a;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  // `prev_ref` is the reference position matched by candidate i - 1, or kNone.
  void dfs(std::size_t i, std::size_t chunks, std::size_t prev_ref) {
    if (chunks >= best_) return;
    if (++nodes_ > budget_) {
      exhausted_ = true;
      return;
    }
    if (i == cand_.size()) {
      best_ = chunks;
      return;
    }
    const std::size_t w = cand_[i];
    if (matched_[w] < target_[w]) {
      // Extending the current chunk first yields a strong incumbent early.
      const std::size_t next = prev_ref == kNone ? kNone : prev_ref + 1;
      if (next != kNone && next < ref_.size() && !used_[next] && ref_[next] == w) {
        take(i, next, chunks);
        if (exhausted_) return;
      }
      for (std::size_t j = 0; j < ref_.size(); ++j) {
        if (used_[j] || ref_[j] != w || j == next) continue;
        take(i, j, chunks + 1);
        if (exhausted_) return;
      }
    }
    if (matched_[w] + remaining_after_[i] >= target_[w]) dfs(i + 1, chunks, kNone);
  }

  void take(std::size_t i, std::size_t j, std::size_t chunks) {
    used_[j] = 1;
    ++matched_[cand_[i]];
    dfs(i + 1, chunks, j);
    --matched_[cand_[i]];
    used_[j] = 0;
  }

  std::vector<std::size_t> cand_, ref_;
  std::size_t budget_;
  std::vector<char> used_;
  std::vector<std::size_t> target_, matched_, remaining_after_;
  std::size_t total_ = 0;
  std::size_t best_ = 0;
  std::size_t nodes_ = 0;
  bool exhausted_ = false;
};

}  // namespace

Alignment align_unigrams(std::span<const std::string> candidate,
                         std::span<const std::string> reference, std::size_t node_budget) {
  return ChunkSearch(candidate, reference, node_budget).run();
}

double meteor_lite(const EvalPair& pair) {
  double best = 0.0;
  for (const auto& ref : pair.references) {
    if (pair.candidate.empty() || ref.empty()) continue;
    const Alignment a = align_unigrams(pair.candidate, ref);
    if (a.matches == 0) continue;
    const double m = static_cast<double>(a.matches);
    const double p = m / static_cast<double>(pair.candidate.size());
    const double r = m / static_cast<double>(ref.size());
    const double fmean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(a.chunks) / m;
    best = std::max(best, fmean * (1.0 - 0.5 * frag * frag * frag));
  }
  return best;
}

CeScores clinical_efficacy(std::span<const TokenSequence> candidates,
                           std::span<const TokenSequence> references, const Lexicon& lexicon,
                           std::span<const std::string> cues) {
  if (candidates.size() != references.size())
    throw ShapeError("clinical_efficacy: candidate and reference counts differ");
  CeScores s;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto c = extract_mentions(candidates[i], lexicon, cues);
    const auto r = extract_mentions(references[i], lexicon, cues);
    std::vector<Mention> both;
    std::set_intersection(c.begin(), c.end(), r.begin(), r.end(), std::back_inserter(both));
    s.tp += static_cast<std::int64_t>(both.size());
    s.fp += static_cast<std::int64_t>(c.size() - both.size());
    s.fn += static_cast<std::int64_t>(r.size() - both.size());
  }
  const bool nothing = s.tp + s.fp == 0 && s.tp + s.fn == 0;
  s.precision = s.tp + s.fp == 0 ? (nothing ? 1.0 : 0.0) : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
  s.recall = s.tp + s.fn == 0 ? (nothing ? 1.0 : 0.0) : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

std::string MetricReport::to_json() const {
  json j = {{"bleu1", bleu1},         {"bleu2", bleu2},       {"bleu3", bleu3},
            {"bleu4", bleu4},         {"rouge_l", rouge_l},   {"cider", cider},
            {"meteor_lite", meteor_lite}, {"ce_precision", ce_precision},
            {"ce_recall", ce_recall}, {"ce_f1", ce_f1},       {"pairs", pairs}};
  return j.dump(2) + "\n";
}

namespace {

std::vector<EvalPair> single_ref_pairs(std::span<const TokenSequence> candidates,
                                       std::span<const TokenSequence> references) {
  if (candidates.size() != references.size())
    throw ShapeError("evaluate: candidate and reference counts differ");
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < candidates.size(); ++i) pairs.push_back({candidates[i], {references[i]}});
  return pairs;
}

std::vector<std::vector<TokenSequence>> reference_sets(std::span<const EvalPair> pairs) {
  std::vector<std::vector<TokenSequence>> sets;
  for (const auto& p : pairs) sets.push_back(p.references);
  return sets;
}

}  // namespace

MetricReport evaluate_corpus(std::span<const TokenSequence> candidates,
                             std::span<const TokenSequence> references, const Lexicon& lexicon,
                             std::span<const std::string> cues) {
  const auto pairs = single_ref_pairs(candidates, references);
  MetricReport m;
  m.pairs = pairs.size();
  if (pairs.empty()) return m;
  m.bleu1 = bleu(pairs, 1);
  m.bleu2 = bleu(pairs, 2);
  m.bleu3 = bleu(pairs, 3);
  m.bleu4 = bleu(pairs, 4);
  double rl = 0.0, me = 0.0;
  for (const auto& p : pairs) {
    rl += rouge_l(p);
    me += meteor_lite(p);
  }
  m.rouge_l = rl / static_cast<double>(pairs.size());
  m.meteor_lite = me / static_cast<double>(pairs.size());
  m.cider = cider(pairs, reference_sets(pairs));
  const auto ce = clinical_efficacy(candidates, references, lexicon, cues);
  m.ce_precision = ce.precision;
  m.ce_recall = ce.recall;
  m.ce_f1 = ce.f1;
  return m;
}

std::string per_report_jsonl(std::span<const std::string> ids,
                             std::span<const TokenSequence> candidates,
                             std::span<const TokenSequence> references) {
  const auto pairs = single_ref_pairs(candidates, references);
  if (ids.size() != pairs.size()) throw ShapeError("per_report_jsonl: id count differs");
  const CiderScorer scorer(reference_sets(pairs));
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::span<const EvalPair> one(&pairs[i], 1);
    json j = {{"id", ids[i]},
              {"bleu4", bleu(one, 4)},
              {"rouge_l", rouge_l(pairs[i])},
              {"cider", scorer.score(pairs[i].candidate, pairs[i].references)},
              {"meteor_lite", meteor_lite(pairs[i])}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace foda
