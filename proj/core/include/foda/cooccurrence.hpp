#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foda/corpus.hpp"

namespace foda {

/// A node (or candidate) seen as a set of surface strings.
struct TermGroup {
  std::string label;
  std::vector<std::string> surfaces;
};

/// Report-level and segment-level co-occurrence counts for a list of term
/// groups. Segments are the spans between "." / "," tokens.
struct CooccurrenceStats {
  std::vector<std::string> labels;
  /// count[i]: reports mentioning group i.
  std::vector<std::int64_t> count;
  /// joint[i][j]: reports mentioning both; joint[i][i] == count[i].
  std::vector<std::vector<std::int64_t>> joint;
  /// Sorted distinct corpus tokens (punctuation excluded).
  std::vector<std::string> context_vocab;
  /// context[i][c]: tokens c seen in the same segment as group i.
  std::vector<std::vector<std::int64_t>> context;
  /// Same, per surface string.
  std::map<std::string, std::vector<std::int64_t>> surface_context;
  /// Column totals of the token-by-token segment co-occurrence matrix.
  std::vector<std::int64_t> context_marginal;
  /// Sum of that matrix.
  std::int64_t total = 0;
  std::int64_t reports = 0;

  std::size_t index_of(const std::string& label) const;
  /// P(i | j) = joint(i, j) / count(j); 0 when count(j) == 0.
  double conditional(std::size_t i, std::size_t j) const;
  /// PPMI weighting of a context-count row:
  /// max(0, log(n(t, c) * total / (n(t) * n(c)))).
  std::vector<double> ppmi(std::span<const std::int64_t> row) const;
  std::vector<double> group_ppmi(std::size_t i) const { return ppmi(context[i]); }
  std::vector<double> surface_ppmi(const std::string& surface) const;
};

/// Splits a token sequence at "." and "," into non-empty segments.
std::vector<TokenSequence> split_segments(std::span<const std::string> tokens);
/// Start index of the first occurrence of `term` (a token list) in `segment`.
std::optional<std::size_t> find_term(std::span<const std::string> segment,
                                     std::span<const std::string> term);

CooccurrenceStats accumulate_stats(std::span<const TokenSequence> corpus,
                                   std::span<const TermGroup> groups);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace foda
