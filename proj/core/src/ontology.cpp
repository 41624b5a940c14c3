#include "foda/ontology.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"

#include "foda/error.hpp"

namespace foda {

using nlohmann::json;

const char* to_string(EntityClass c) {
  switch (c) {
    case EntityClass::DiseaseSpecific: return "disease_specific";
    case EntityClass::DiseaseFree: return "disease_free";
    case EntityClass::Organ: return "organ";
  }
  return "?";
}

EntityClass entity_class_from_string(std::string_view s) {
  if (s == "disease_specific") return EntityClass::DiseaseSpecific;
  if (s == "disease_free") return EntityClass::DiseaseFree;
  if (s == "organ") return EntityClass::Organ;
  throw LoadError("unknown entity class '" + std::string(s) + "'");
}

bool Lexicon::is_organ(std::string_view term) const {
  return std::find(organs.begin(), organs.end(), term) != organs.end();
}

std::string Lexicon::to_json() const {
  return json{{"organs", organs}, {"diseases", diseases}}.dump(2) + "\n";
}

Lexicon Lexicon::from_json(std::string_view text) {
  try {
    json doc = json::parse(text);
    Lexicon lex{doc.at("organs").get<std::vector<std::string>>(),
                doc.at("diseases").get<std::vector<std::string>>()};
    if (lex.organs.empty() && lex.diseases.empty()) throw ConfigError("lexicon: no terms");
    return lex;
  } catch (const json::exception& e) {
    throw LoadError(std::string("lexicon: ") + e.what());
  }
}

Lexicon Lexicon::from_generator(const GeneratorConfig& cfg) {
  return Lexicon{cfg.organ_names(), cfg.diseases()};
}

std::vector<std::string> default_negation_cues() {
  return {"no", "normal", "without", "clear", "free"};
}

void OntologyConfig::validate() const {
  if (alpha < 1 || alpha > beta) throw ConfigError("ontology: need 1 <= alpha <= beta");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("ontology: gamma must be in [0, 1]");
  if (lexicon.organs.empty() && lexicon.diseases.empty()) throw ConfigError("ontology: empty lexicon");
}

std::int64_t OntologyNode::freq() const {
  std::int64_t f = 0;
  for (const auto& m : members) f += m.freq;
  return f;
}

std::vector<std::string> OntologyNode::surfaces() const {
  std::vector<std::string> out;
  for (const auto& m : members) out.push_back(m.surface);
  return out;
}

EntityClass classify_mention(std::span<const std::string> segment, std::string_view entity,
                             std::span<const std::string> cues, bool is_organ) {
  const TokenSequence term = tokenize(entity);
  auto pos = find_term(segment, term);
  if (!pos) throw NotFound("classify_mention: '" + std::string(entity) + "' not in segment");
  if (is_organ) return EntityClass::Organ;
  for (std::size_t p = 0; p <= *pos; ++p) {
    if (std::find(cues.begin(), cues.end(), segment[p]) != cues.end()) return EntityClass::DiseaseFree;
  }
  return EntityClass::DiseaseSpecific;
}

std::vector<CandidateEntity> extract_candidates(std::span<const TokenSequence> corpus,
                                                const Lexicon& lexicon,
                                                std::span<const std::string> cues) {
  struct Term {
    std::string surface;
    TokenSequence tokens;
    bool organ;
  };
  std::vector<Term> terms;
  for (const auto& o : lexicon.organs) terms.push_back({o, tokenize(o), true});
  for (const auto& d : lexicon.diseases) terms.push_back({d, tokenize(d), false});

  std::vector<CandidateEntity> tally(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    tally[i].surface = terms[i].surface;
    tally[i].organ = terms[i].organ;
  }
  for (const auto& doc : corpus) {
    for (const auto& seg : split_segments(doc)) {
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!find_term(seg, terms[i].tokens)) continue;
        ++tally[i].freq;
        if (terms[i].organ) continue;
        if (classify_mention(seg, terms[i].surface, cues) == EntityClass::DiseaseFree) {
          ++tally[i].free;
        } else {
          ++tally[i].specific;
        }
      }
    }
  }
  std::vector<CandidateEntity> out;
  for (auto& c : tally)
    if (c.freq > 0) out.push_back(std::move(c));
  return out;
}

std::vector<CandidateEntity> filter_candidates(std::span<const CandidateEntity> candidates,
                                               std::int64_t alpha, std::int64_t beta) {
  std::vector<CandidateEntity> out;
  for (const auto& c : candidates)
    if (c.freq >= alpha && c.freq <= beta) out.push_back(c);
  return out;
}

double similarity(const CandidateEntity& a, const CandidateEntity& b,
                  const CooccurrenceStats& stats) {
  const auto va = stats.surface_ppmi(a.surface);
  const auto vb = stats.surface_ppmi(b.surface);
  return std::max(0.0, cosine(va, vb));
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<OntologyNode> merge_candidates(std::span<const CandidateEntity> candidates,
                                           double gamma, const SimilarityFn& sim) {
  std::vector<CandidateEntity> cs(candidates.begin(), candidates.end());
  std::sort(cs.begin(), cs.end(),
            [](const auto& a, const auto& b) { return a.surface < b.surface; });
  UnionFind uf(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i)
    for (std::size_t j = i + 1; j < cs.size(); ++j) {
      if (cs[i].organ != cs[j].organ) continue;
      if (sim(cs[i], cs[j]) >= gamma) uf.unite(i, j);
    }
  std::map<std::size_t, std::vector<std::size_t>> comps;
  for (std::size_t i = 0; i < cs.size(); ++i) comps[uf.find(i)].push_back(i);

  std::vector<OntologyNode> nodes;
  for (const auto& [_, idx] : comps) {
    OntologyNode node;
    std::int64_t spec = 0, free = 0;
    const CandidateEntity* best = nullptr;
    for (std::size_t i : idx) {
      node.members.push_back(cs[i]);
      spec += cs[i].specific;
      free += cs[i].free;
      if (!best || cs[i].freq > best->freq ||
          (cs[i].freq == best->freq && cs[i].surface < best->surface)) {
        best = &cs[i];
      }
    }
    node.label = best->surface;
    if (best->organ) {
      node.cls = EntityClass::Organ;
    } else {
      node.cls = free > spec ? EntityClass::DiseaseFree : EntityClass::DiseaseSpecific;
    }
    nodes.push_back(std::move(node));
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a.label < b.label; });
  return nodes;
}

std::vector<OntologyNode> build_ontology(std::span<const TokenSequence> corpus,
                                         const OntologyConfig& cfg) {
  cfg.validate();
  auto candidates = extract_candidates(corpus, cfg.lexicon, cfg.negation_cues);
  auto filtered = filter_candidates(candidates, cfg.alpha, cfg.beta);
  std::vector<TermGroup> groups;
  for (const auto& c : filtered) groups.push_back({c.surface, {c.surface}});
  const auto stats = accumulate_stats(corpus, groups);
  return merge_candidates(filtered, cfg.gamma, [&](const auto& a, const auto& b) {
    return similarity(a, b, stats);
  });
}

std::string ontology_to_json(std::span<const OntologyNode> nodes) {
  json out = json::array();
  for (const auto& n : nodes) {
    json members = json::array();
    for (const auto& m : n.members) {
      members.push_back({{"surface", m.surface},
                         {"freq", m.freq},
                         {"specific", m.specific},
                         {"free", m.free},
                         {"organ", m.organ}});
    }
    out.push_back({{"label", n.label},
                   {"class", to_string(n.cls)},
                   {"freq", n.freq()},
                   {"members", std::move(members)}});
  }
  return out.dump(2) + "\n";
}

std::vector<OntologyNode> ontology_from_json(std::string_view text) {
  std::vector<OntologyNode> nodes;
  try {
    for (const auto& j : json::parse(text)) {
      OntologyNode n;
      n.label = j.at("label").get<std::string>();
      n.cls = entity_class_from_string(j.at("class").get<std::string>());
      for (const auto& m : j.at("members")) {
        n.members.push_back({m.at("surface").get<std::string>(), m.at("freq").get<std::int64_t>(),
                             m.at("specific").get<std::int64_t>(), m.at("free").get<std::int64_t>(),
                             m.at("organ").get<bool>()});
      }
      if (n.members.empty()) throw LoadError("ontology: node '" + n.label + "' has no members");
      nodes.push_back(std::move(n));
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("ontology: ") + e.what());
  }
  return nodes;
}

std::vector<Mention> extract_mentions(std::span<const std::string> tokens, const Lexicon& lexicon,
                                      std::span<const std::string> cues) {
  std::set<Mention> found;
  std::vector<std::pair<std::string, TokenSequence>> terms;
  for (const auto& d : lexicon.diseases) terms.emplace_back(d, tokenize(d));
  for (const auto& seg : split_segments(tokens)) {
    for (const auto& [surface, toks] : terms) {
      if (!find_term(seg, toks)) continue;
      found.insert(Mention{surface, classify_mention(seg, surface, cues)});
    }
  }
  return {found.begin(), found.end()};
}

}  // namespace foda
