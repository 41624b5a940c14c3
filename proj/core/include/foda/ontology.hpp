#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foda/cooccurrence.hpp"
#include "foda/corpus.hpp"

namespace foda {

enum class EntityClass { DiseaseSpecific, DiseaseFree, Organ };

const char* to_string(EntityClass c);
EntityClass entity_class_from_string(std::string_view s);

/// Lexicon file: {"organs": [str], "diseases": [str]}.
struct Lexicon {
  std::vector<std::string> organs;
  std::vector<std::string> diseases;

  bool is_organ(std::string_view term) const;
  std::string to_json() const;
  static Lexicon from_json(std::string_view text);
  static Lexicon from_generator(const GeneratorConfig& cfg);
};

std::vector<std::string> default_negation_cues();

struct OntologyConfig {
  std::int64_t alpha = 1;
  std::int64_t beta = std::numeric_limits<std::int64_t>::max();
  double gamma = 0.9;
  std::vector<std::string> negation_cues = default_negation_cues();
  Lexicon lexicon;

  void validate() const;
};

struct CandidateEntity {
  std::string surface;
  std::int64_t freq = 0;
  std::int64_t specific = 0;
  std::int64_t free = 0;
  bool organ = false;

  friend bool operator==(const CandidateEntity&, const CandidateEntity&) = default;
};

struct OntologyNode {
  std::string label;
  std::vector<CandidateEntity> members;
  EntityClass cls = EntityClass::DiseaseSpecific;

  std::int64_t freq() const;
  std::vector<std::string> surfaces() const;
  friend bool operator==(const OntologyNode&, const OntologyNode&) = default;
};

/// DiseaseFree iff some cue occurs in `segment` at or before the first
/// occurrence of `entity`; organs are always Organ. Throws NotFound when the
/// entity does not occur.
EntityClass classify_mention(std::span<const std::string> segment, std::string_view entity,
                             std::span<const std::string> cues, bool is_organ = false);

/// Lexicon terms found as token subsequences, counted once per segment.
/// Output follows lexicon order (organs first) and omits unseen terms.
std::vector<CandidateEntity> extract_candidates(std::span<const TokenSequence> corpus,
                                                const Lexicon& lexicon,
                                                std::span<const std::string> cues);

/// {c : alpha <= freq(c) <= beta}, order preserved.
std::vector<CandidateEntity> filter_candidates(std::span<const CandidateEntity> candidates,
                                               std::int64_t alpha, std::int64_t beta);

/// max(0, cosine) of the candidates' PPMI context vectors; 0 if either is zero.
double similarity(const CandidateEntity& a, const CandidateEntity& b,
                  const CooccurrenceStats& stats);

using SimilarityFn = std::function<double(const CandidateEntity&, const CandidateEntity&)>;

/// Connected components of {(i, j) : sim(i, j) >= gamma} via union-find.
/// Organs never merge with diseases. The label is the most frequent member
/// (lexicographic tie-break); the class is Organ for organs, otherwise the
/// majority mention class with ties going to DiseaseSpecific. Nodes are
/// sorted by label, members by surface.
std::vector<OntologyNode> merge_candidates(std::span<const CandidateEntity> candidates,
                                           double gamma, const SimilarityFn& sim);

/// extract -> filter -> merge with PPMI similarity over `corpus`.
std::vector<OntologyNode> build_ontology(std::span<const TokenSequence> corpus,
                                         const OntologyConfig& cfg);

std::string ontology_to_json(std::span<const OntologyNode> nodes);
std::vector<OntologyNode> ontology_from_json(std::string_view text);

/// One classified disease mention in a report.
struct Mention {
  std::string entity;
  EntityClass cls;
  auto operator<=>(const Mention&) const = default;
};

/// Distinct (disease, class) pairs mentioned in a report. Organs are skipped.
std::vector<Mention> extract_mentions(std::span<const std::string> tokens, const Lexicon& lexicon,
                                      std::span<const std::string> cues);

}  // namespace foda
