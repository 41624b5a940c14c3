#include "foda/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

#include "foda/error.hpp"
#include "foda/io.hpp"
#include "foda/rng.hpp"

namespace foda {

using nlohmann::json;

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

TokenSequence tokenize(std::string_view text) {
  // Pass 1: lowercase and keep [a-z0-9.,] plus whitespace.
  std::string kept;
  kept.reserve(text.size());
  for (char raw : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if ((c >= 'a' && c <= 'z') || is_digit(c) || c == '.' || c == ',') {
      kept.push_back(c);
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      kept.push_back(' ');
    }
  }
  // Pass 2: split punctuation that is not inside a number.
  TokenSequence out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const char c = kept[i];
    if (c == ' ') {
      flush();
    } else if (c == '.' || c == ',') {
      const bool numeric = i > 0 && i + 1 < kept.size() && is_digit(kept[i - 1]) &&
                           is_digit(kept[i + 1]);
      if (numeric) {
        cur.push_back(c);
      } else {
        flush();
        out.emplace_back(1, c);
      }
    } else {
      cur.push_back(c);
    }
  }
  flush();
  if (out.empty()) throw EmptyReport("tokenize: report is empty after normalization");
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::build(std::span<const TokenSequence> corpus, std::size_t min_freq) {
  if (min_freq < 1) throw ConfigError("build_vocab: min_freq must be >= 1");
  if (corpus.empty()) throw EmptyCorpus("build_vocab: empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& seq : corpus)
    for (const auto& tok : seq) ++freq[tok];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq)
    if (n >= min_freq) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (auto& [tok, _] : kept) words.push_back(tok);
  return from_words(std::move(words));
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  Vocabulary v;
  v.tokens_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (auto& w : words) {
    if (v.ids_.count(w) != 0) throw ConfigError("Vocabulary: duplicate token '" + w + "'");
    v.ids_.emplace(w, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(std::move(w));
  }
  return v;
}

TokenId Vocabulary::id_of(std::string_view token) const {
  return find(token).value_or(kUnk);
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id >= tokens_.size()) throw NotFound("Vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::string Vocabulary::to_json() const {
  json doc = {{"version", 1}, {"words", std::vector<std::string>(words().begin(), words().end())}};
  return doc.dump() + "\n";
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  try {
    json doc = json::parse(text);
    if (doc.at("version") != 1) throw LoadError("vocabulary: unsupported version " + doc["version"].dump());
    return from_words(doc.at("words").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw LoadError(std::string("vocabulary: ") + e.what());
  }
}

std::vector<TokenId> encode_report(std::span<const std::string> tokens, const Vocabulary& vocab,
                                   std::size_t max_len) {
  const std::size_t n = std::min(tokens.size(), max_len);
  std::vector<TokenId> ids;
  ids.reserve(n + 2);
  ids.push_back(Vocabulary::kBos);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(vocab.id_of(tokens[i]));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

TokenSequence decode_ids(std::span<const TokenId> ids, const Vocabulary& vocab) {
  TokenSequence out;
  for (TokenId id : ids)
    if (!Vocabulary::is_reserved(id)) out.push_back(vocab.token_of(id));
  return out;
}

// ---------------------------------------------------------------------------
// Generator

GeneratorConfig GeneratorConfig::defaults() {
  GeneratorConfig cfg;
  cfg.organs = {
      {"heart", {"cardiomegaly"}},
      {"lung", {"pneumonia", "edema", "atelectasis", "nodule", "opacity"}},
      {"pleura", {"effusion", "pneumothorax", "thickening"}},
      {"bone", {"fracture", "scoliosis"}},
  };
  return cfg;
}

void GeneratorConfig::validate() const {
  if (organs.empty()) throw ConfigError("generator: at least one organ is required");
  if (n_studies < 1) throw ConfigError("generator: n_studies must be >= 1");
  if (regions < 1 || visual_dim < 1) throw ConfigError("generator: regions and visual_dim must be >= 1");
  if (!(negation_prob >= 0.0 && negation_prob <= 1.0)) throw ConfigError("generator: negation_prob must be in [0, 1]");
  if (!(noise >= 0.0)) throw ConfigError("generator: noise must be >= 0");
  if (!(mean_findings >= 0.0)) throw ConfigError("generator: mean_findings must be >= 0");
  std::set<std::string> seen;
  for (const auto& o : organs) {
    if (o.name.empty()) throw ConfigError("generator: empty organ name");
    if (!seen.insert(o.name).second) throw ConfigError("generator: duplicate term '" + o.name + "'");
    for (const auto& d : o.diseases) {
      if (d.empty()) throw ConfigError("generator: empty disease name");
      if (!seen.insert(d).second) throw ConfigError("generator: duplicate term '" + d + "'");
    }
  }
  if (diseases().empty()) throw ConfigError("generator: lexicon has no diseases");
}

std::vector<std::string> GeneratorConfig::diseases() const {
  std::vector<std::string> out;
  for (const auto& o : organs) out.insert(out.end(), o.diseases.begin(), o.diseases.end());
  return out;
}

std::vector<std::string> GeneratorConfig::organ_names() const {
  std::vector<std::string> out;
  for (const auto& o : organs) out.push_back(o.name);
  return out;
}

std::string GeneratorConfig::to_json() const {
  json organs_j = json::array();
  for (const auto& o : organs) organs_j.push_back({{"name", o.name}, {"diseases", o.diseases}});
  json doc = {{"n_studies", n_studies},       {"organs", organs_j},
              {"zipf_exponent", zipf_exponent}, {"mean_findings", mean_findings},
              {"negation_prob", negation_prob}, {"regions", regions},
              {"visual_dim", visual_dim},       {"noise", noise},
              {"signature_seed", signature_seed}};
  return doc.dump(2) + "\n";
}

GeneratorConfig GeneratorConfig::from_json(std::string_view text) {
  GeneratorConfig cfg = defaults();
  try {
    json doc = json::parse(text);
    cfg.n_studies = doc.value("n_studies", cfg.n_studies);
    cfg.zipf_exponent = doc.value("zipf_exponent", cfg.zipf_exponent);
    cfg.mean_findings = doc.value("mean_findings", cfg.mean_findings);
    cfg.negation_prob = doc.value("negation_prob", cfg.negation_prob);
    cfg.regions = doc.value("regions", cfg.regions);
    cfg.visual_dim = doc.value("visual_dim", cfg.visual_dim);
    cfg.noise = doc.value("noise", cfg.noise);
    cfg.signature_seed = doc.value("signature_seed", cfg.signature_seed);
    if (doc.contains("organs")) {
      cfg.organs.clear();
      for (const auto& o : doc.at("organs")) {
        cfg.organs.push_back({o.at("name").get<std::string>(),
                              o.value("diseases", std::vector<std::string>{})});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::vector<double> finding_signature(std::string_view label, const GeneratorConfig& cfg) {
  CounterRng rng(cfg.signature_seed ^ fnv1a(label));
  std::vector<double> sig(cfg.visual_dim);
  for (double& x : sig) x = rng.gaussian();
  return sig;
}

VisualFeatures synth_visual_features(std::span<const std::string> latent_findings,
                                     const GeneratorConfig& cfg, std::uint64_t seed) {
  const std::size_t k = cfg.regions;
  if (k < latent_findings.size()) {
    throw ConfigError("synth_visual_features: " + std::to_string(latent_findings.size()) +
                      " findings do not fit in " + std::to_string(k) + " regions");
  }
  if (k < 1 || cfg.visual_dim < 1) throw ConfigError("synth_visual_features: empty feature shape");
  CounterRng rng(seed);
  std::vector<std::vector<double>> sigs;
  for (const auto& f : latent_findings) sigs.push_back(finding_signature(f, cfg));

  // owner[r] = index into sigs, or -1 for background.
  std::vector<long> owner(k, -1);
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t i = 0; i < sigs.size(); ++i) owner[order[i]] = static_cast<long>(i);
  for (std::size_t i = sigs.size(); i < k; ++i) {
    if (!sigs.empty() && rng.uniform() < 0.5) owner[order[i]] = static_cast<long>(rng.below(sigs.size()));
  }

  Matrix m(k, cfg.visual_dim);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < cfg.visual_dim; ++c) {
      const double base = owner[r] >= 0 ? sigs[static_cast<std::size_t>(owner[r])][c] : 0.0;
      m(r, c) = cfg.noise > 0.0 ? base + cfg.noise * rng.gaussian() : base;
    }
  }
  return VisualFeatures{std::move(m)};
}

std::string render_report(std::span<const std::string> findings, const GeneratorConfig& cfg,
                          std::uint64_t seed) {
  CounterRng rng(seed);
  const std::set<std::string> positive(findings.begin(), findings.end());
  std::vector<std::string> sentences;
  for (const auto& organ : cfg.organs) {
    std::vector<std::string> pos, neg;
    for (const auto& d : organ.diseases) {
      if (positive.count(d)) {
        pos.push_back(d);
      } else if (rng.uniform() < cfg.negation_prob) {
        neg.push_back(d);
      }
    }
    if (!pos.empty()) {
      std::string s = "the " + organ.name + " shows " + pos[0];
      for (std::size_t i = 1; i < pos.size(); ++i) s += " and " + pos[i];
      sentences.push_back(s + " .");
    } else {
      sentences.push_back("the " + organ.name + " is normal .");
    }
    if (!neg.empty()) {
      std::string s = "no " + neg[0];
      for (std::size_t i = 1; i < neg.size(); ++i) s += " or " + neg[i];
      sentences.push_back(s + " .");
    }
  }
  return join_tokens(sentences);
}

std::vector<Study> generate_synthetic_corpus(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto diseases = cfg.diseases();
  const std::size_t n = cfg.n_studies;
  CounterRng root(seed);

  // Zipf allotment by largest remainder, capped at n studies per disease.
  std::vector<double> w(diseases.size());
  double wsum = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = std::pow(static_cast<double>(k + 1), -cfg.zipf_exponent);
    wsum += w[k];
  }
  const auto total = static_cast<std::size_t>(std::llround(cfg.mean_findings * static_cast<double>(n)));
  std::vector<std::size_t> counts(w.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double exact = static_cast<double>(total) * w[k] / wsum;
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i, ++assigned) {
    ++counts[remainders[i].second];
  }
  for (auto& c : counts) c = std::min(c, n);

  std::vector<std::vector<std::string>> findings(n);
  CounterRng assign = root.split(1);
  std::vector<std::size_t> pool(n);
  for (std::size_t k = 0; k < diseases.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    // Partial Fisher-Yates: the first counts[k] entries are a uniform subset.
    for (std::size_t i = 0; i < counts[k]; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(assign.below(n - i));
      std::swap(pool[i], pool[j]);
      findings[pool[i]].push_back(diseases[k]);
    }
  }

  std::vector<Study> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Keep lexicon order inside each study.
    std::vector<std::string> f;
    for (const auto& d : diseases)
      if (std::find(findings[i].begin(), findings[i].end(), d) != findings[i].end()) f.push_back(d);
    if (f.size() > cfg.regions) f.resize(cfg.regions);
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", i);
    Study s;
    s.report.id = id;
    s.report.text = render_report(f, cfg, root.split(1000 + 2 * i).next_u64());
    s.report.findings = f;
    s.visual = synth_visual_features(f, cfg, root.split(1001 + 2 * i).next_u64());
    s.latent_findings = std::move(f);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSONL

std::string reports_to_jsonl(std::span<const Report> reports) {
  std::string out;
  for (const auto& r : reports) {
    json j = {{"id", r.id}, {"text", r.text}};
    if (r.findings) j["findings"] = *r.findings;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<Report> reports_from_jsonl(std::string_view text) {
  std::vector<Report> out;
  std::set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      Report r;
      r.id = j.at("id").get<std::string>();
      r.text = j.at("text").get<std::string>();
      if (j.contains("findings")) r.findings = j.at("findings").get<std::vector<std::string>>();
      if (r.text.empty()) throw LoadError("line " + std::to_string(lineno) + ": empty text");
      if (!ids.insert(r.id).second) throw LoadError("line " + std::to_string(lineno) + ": duplicate id " + r.id);
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw LoadError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Report> read_reports(const std::filesystem::path& path) {
  return reports_from_jsonl(read_text_file(path));
}

void write_reports(const std::filesystem::path& path, std::span<const Report> reports) {
  write_text_file(path, reports_to_jsonl(reports));
}

std::string features_to_jsonl(std::span<const Study> studies) {
  std::string out;
  for (const auto& s : studies) {
    const Matrix& m = s.visual.matrix;
    json j = {{"id", s.report.id},
              {"rows", m.rows()},
              {"cols", m.cols()},
              {"data", std::vector<double>(m.data().begin(), m.data().end())}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::map<std::string, VisualFeatures> features_from_jsonl(std::string_view text) {
  std::map<std::string, VisualFeatures> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
               j.at("data").get<std::vector<double>>());
      if (m.rows() < 1 || m.cols() < 1 || !m.all_finite()) throw LoadError("features: bad matrix");
      out.emplace(j.at("id").get<std::string>(), VisualFeatures{std::move(m)});
    } catch (const json::exception& e) {
      throw LoadError(std::string("features: ") + e.what());
    }
  }
  return out;
}

}  // namespace foda
