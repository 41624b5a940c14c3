#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "foda/corpus.hpp"
#include "foda/ontology.hpp"

namespace foda {

struct EvalPair {
  TokenSequence candidate;
  std::vector<TokenSequence> references;
};

using NgramCounts = std::map<std::vector<std::string>, std::int64_t>;
NgramCounts ngram_counts(std::span<const std::string> tokens, std::size_t n);

/// Corpus BLEU over orders 1..n: clipped n-gram precisions summed over the
/// corpus, uniform geometric mean, brevity penalty exp(1 - r/c) when c < r
/// with r the closest reference length (shorter on ties). 0 if any order has
/// zero matches or the corpus has no candidate tokens.
double bleu(std::span<const EvalPair> pairs, int n);

/// Sentence BLEU-4 for rewards: unigram precision unsmoothed, orders 2..4
/// use (matches + 1) / (total + 1). 0 without unigram matches.
double sentence_bleu4(std::span<const std::string> candidate,
                      std::span<const TokenSequence> references);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// LCS F-measure with P and R each maximised over references.
double rouge_l(const EvalPair& pair, double beta = 1.2);

/// Plain CIDEr. Document frequencies are counted over reference sets (one set
/// per image); idf = log(|sets| / (1 + df)).
class CiderScorer {
 public:
  explicit CiderScorer(std::span<const std::vector<TokenSequence>> reference_sets);

  /// 10 * mean over n = 1..4 of the average TF-IDF cosine to each reference.
  double score(std::span<const std::string> candidate,
               std::span<const TokenSequence> references) const;
  double idf(const std::vector<std::string>& ngram) const;
  std::size_t set_count() const { return sets_; }

 private:
  std::map<std::vector<std::string>, double> df_;
  std::size_t sets_ = 0;
};

/// Mean per-pair CIDEr with document frequencies from `corpus_refs`.
double cider(std::span<const EvalPair> pairs, std::span<const std::vector<TokenSequence>> corpus_refs);

struct Alignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  /// False when the search budget ran out and `chunks` is only an upper bound.
  bool exact = true;
};

/// Exact-unigram alignment with the maximum number of matches and, among
/// those, the fewest chunks (branch and bound, greedy incumbent first).
Alignment align_unigrams(std::span<const std::string> candidate,
                         std::span<const std::string> reference,
                         std::size_t node_budget = 2'000'000);

/// F_mean = 10PR / (R + 9P), penalty 0.5 (chunks / matches)^3, maximised
/// over references. Exact matches only: no stemming or synonyms.
double meteor_lite(const EvalPair& pair);

struct CeScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

/// Micro P/R/F1 over (disease, class) mentions; a hit needs the same disease
/// and the same class. Empty denominators give 1 when both sides are empty.
CeScores clinical_efficacy(std::span<const TokenSequence> candidates,
                           std::span<const TokenSequence> references, const Lexicon& lexicon,
                           std::span<const std::string> cues);

struct MetricReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double rouge_l = 0, cider = 0, meteor_lite = 0;
  double ce_precision = 0, ce_recall = 0, ce_f1 = 0;
  std::size_t pairs = 0;

  std::string to_json() const;
};

/// All metrics over single-reference pairs (candidate i vs reference i).
MetricReport evaluate_corpus(std::span<const TokenSequence> candidates,
                             std::span<const TokenSequence> references, const Lexicon& lexicon,
                             std::span<const std::string> cues);

/// One JSON object per line: {"id", "bleu4", "rouge_l", "cider", "meteor_lite"}.
std::string per_report_jsonl(std::span<const std::string> ids,
                             std::span<const TokenSequence> candidates,
                             std::span<const TokenSequence> references);

}  // namespace foda
