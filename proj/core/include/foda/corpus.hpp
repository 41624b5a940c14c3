#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foda/matrix.hpp"

namespace foda {

/// One report as it appears in a corpus file.
struct Report {
  std::string id;
  std::string text;
  /// Ground-truth positive findings; only synthetic corpora carry them.
  std::optional<std::vector<std::string>> findings;

  friend bool operator==(const Report&, const Report&) = default;
};

/// Normalised word tokens: lowercase, characters in [a-z0-9.,] only.
using TokenSequence = std::vector<std::string>;
using TokenId = std::uint32_t;

/// Lowercases, drops characters outside [a-z0-9 .,], and splits on
/// whitespace. "." and "," become standalone tokens unless they sit between
/// two digits ("2.5cm" stays whole). Throws EmptyReport when nothing is left.
TokenSequence tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kFirstWord = 4;

  /// Tokens with frequency >= min_freq, ordered by descending frequency
  /// then lexicographically. Throws EmptyCorpus / ConfigError.
  static Vocabulary build(std::span<const TokenSequence> corpus, std::size_t min_freq);
  /// Rebuilds from the word list (ids 4, 5, ... in order).
  static Vocabulary from_words(std::vector<std::string> words);

  /// kUnk for unknown tokens.
  TokenId id_of(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token_of(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  static bool is_reserved(TokenId id) { return id < kFirstWord; }
  /// Non-reserved words in id order.
  std::span<const std::string> words() const {
    return std::span<const std::string>(tokens_).subspan(kFirstWord);
  }

  std::string to_json() const;
  static Vocabulary from_json(std::string_view text);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> ids_;
};

inline constexpr std::size_t kDefaultMaxLen = 128;

/// [BOS] + ids of the first max_len tokens (UNK when out of vocabulary) + [EOS].
std::vector<TokenId> encode_report(std::span<const std::string> tokens, const Vocabulary& vocab,
                                   std::size_t max_len = kDefaultMaxLen);
/// Inverse of encode_report: maps ids back to tokens, dropping reserved ids.
TokenSequence decode_ids(std::span<const TokenId> ids, const Vocabulary& vocab);

struct OrganSpec {
  std::string name;
  std::vector<std::string> diseases;
};

/// Configuration of the synthetic study generator. Disease popularity ranks
/// follow the flattened organ/disease order.
struct GeneratorConfig {
  std::size_t n_studies = 500;
  std::vector<OrganSpec> organs;
  double zipf_exponent = 1.2;
  /// Average number of positive findings per study.
  double mean_findings = 1.2;
  /// Probability that an absent disease is stated as negated ("no ...").
  double negation_prob = 0.8;
  std::size_t regions = 16;
  std::size_t visual_dim = 32;
  double noise = 0.3;
  /// Seeds the per-label signature vectors (fixed per lexicon).
  std::uint64_t signature_seed = 7;

  static GeneratorConfig defaults();
  void validate() const;
  std::vector<std::string> diseases() const;
  std::vector<std::string> organ_names() const;

  std::string to_json() const;
  static GeneratorConfig from_json(std::string_view text);
};

struct VisualFeatures {
  Matrix matrix;  ///< K x d_v
  std::size_t regions() const { return matrix.rows(); }
  std::size_t dim() const { return matrix.cols(); }
};

struct Study {
  Report report;
  std::vector<std::string> latent_findings;
  VisualFeatures visual;
};

/// Seeded unit-Gaussian signature of one finding label.
std::vector<double> finding_signature(std::string_view label, const GeneratorConfig& cfg);

/// Region features: each finding owns at least one region holding its
/// signature, the remaining regions hold either background (zeros) or a
/// repeated finding; Gaussian noise of std cfg.noise is added everywhere.
VisualFeatures synth_visual_features(std::span<const std::string> latent_findings,
                                     const GeneratorConfig& cfg, std::uint64_t seed);

/// Deterministic templated corpus. Per-disease study counts are allotted
/// from Zipf weights by largest remainder (so the rank-frequency profile is
/// monotone), then assigned to uniformly drawn studies.
std::vector<Study> generate_synthetic_corpus(const GeneratorConfig& cfg, std::uint64_t seed);

/// Renders the templated report text for one finding set.
std::string render_report(std::span<const std::string> findings, const GeneratorConfig& cfg,
                          std::uint64_t seed);

// JSON Lines: {"id": str, "text": str, "findings": [str]} per line.
std::string reports_to_jsonl(std::span<const Report> reports);
std::vector<Report> reports_from_jsonl(std::string_view text);
std::vector<Report> read_reports(const std::filesystem::path& path);
void write_reports(const std::filesystem::path& path, std::span<const Report> reports);

// Visual features sidecar: {"id": str, "rows": K, "cols": d_v, "data": [...]} per line.
std::string features_to_jsonl(std::span<const Study> studies);
std::map<std::string, VisualFeatures> features_from_jsonl(std::string_view text);

}  // namespace foda
